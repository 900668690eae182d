#include "bsync/baselines.hpp"

#include <algorithm>

namespace bsync {

namespace {

Block baseline_block(ValidatorId proposer, Round r, const std::vector<BlockRef>& parents,
                     std::uint32_t n, std::vector<std::uint8_t> payload) {
  Block b;
  b.round = r;
  b.author = proposer;
  b.parents = parents;
  std::sort(b.parents.begin(), b.parents.end(),
            [](const BlockRef& x, const BlockRef& y) { return x.author < y.author; });
  // Baseline blocks carry no reachability hints beyond their direct parents.
  b.ancestors.assign(n, kNoRound);
  for (const auto& p : b.parents) b.ancestors[p.author.value] = p.round;
  b.watermark.assign(n, kNoRound);
  b.payload = std::move(payload);
  seal(b);
  return b;
}

void record_drop(Context& ctx, Validation v) {
  TraceRecord r;
  r.kind = TraceKind::Drop;
  r.cause = std::string(to_string(v));
  ctx.record(std::move(r));
}

}  // namespace

// ---------------------------------------------------------------------------
// Uncertified

std::optional<Block> uncertified_push(const DagState& state, ValidatorId proposer, Round r,
                                      std::vector<std::uint8_t> payload) {
  const auto& cfg = state.config();
  std::vector<BlockRef> parents;
  bool has_own = false;
  for (const auto& b : state.accepted_at(r - 1)) {
    parents.push_back(b->ref());
    has_own = has_own || b->author == proposer;
  }
  if (!has_own || parents.size() < cfg.quorum()) return std::nullopt;
  return baseline_block(proposer, r, parents, cfg.n, std::move(payload));
}

std::vector<ValidatorId> uncertified_random_pull(std::mt19937_64& rng, ValidatorId self,
                                                 const ProtocolConfig& cfg) {
  std::vector<ValidatorId> pool;
  for (std::uint32_t k = 0; k < cfg.n; ++k)
    if (k != self.value) pool.push_back(ValidatorId(k));
  const std::size_t c = std::min<std::size_t>(cfg.random_pull_fanout, pool.size());
  // Partial Fisher-Yates with the portable index helper.
  for (std::size_t i = 0; i < c; ++i) {
    std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(c);
  return pool;
}

UncertifiedSynchronizer::UncertifiedSynchronizer(ValidatorId self, const ProtocolConfig& cfg,
                                                 const ValidatorOptions& opts)
    : ValidatorBase(self, cfg, AcceptRule::FullHistory, opts) {}

void UncertifiedSynchronizer::ingest(Context& ctx, const BlockPtr& b) {
  if (auto v = validate_block(*b, cfg_); v != Validation::Ok) {
    record_drop(ctx, v);
    return;
  }
  if (dag_.insert_received(b) == InsertResult::DuplicateIgnored) return;
  attempts_.erase(b->digest);
  record_accepts(ctx, dag_.accept_ready());
  request_tick(ctx);
}

void UncertifiedSynchronizer::on_block_delivered(Context& ctx, ValidatorId, const BlockMessage& msg) {
  if (halted_) return;
  ingest(ctx, msg.block);
}

void UncertifiedSynchronizer::on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) {
  if (halted_) return;
  auto served = handle_pull_request(dag_, self_, req);
  if (!served.response.blocks.empty()) ctx.send(from, std::move(served.response));
}

void UncertifiedSynchronizer::on_pull_response(Context& ctx, ValidatorId, const PullResponse& resp) {
  if (halted_) return;
  auto blocks = resp.blocks;
  std::sort(blocks.begin(), blocks.end(),
            [](const BlockPtr& a, const BlockPtr& b) { return a->slot() < b->slot(); });
  for (const auto& b : blocks) ingest(ctx, b);
}

std::optional<Block> UncertifiedSynchronizer::make_block(Context&, Round r) {
  return uncertified_push(dag_, self_, r, next_payload());
}

void UncertifiedSynchronizer::pull_step(Context& ctx) {
  std::set<BlockDigest> missing;
  for (const Block* b : dag_.pending_blocks()) {
    for (const auto& p : b->parents)
      if (!dag_.received(p.digest)) missing.insert(p.digest);
    for (const auto& w : b->weaklinks)
      if (!dag_.received(w.digest)) missing.insert(w.digest);
  }
  for (auto it = attempts_.begin(); it != attempts_.end();)
    it = missing.count(it->first) ? std::next(it) : attempts_.erase(it);

  bool sent = false;
  for (const auto& d : missing) {
    auto& a = attempts_[d];
    if (a.count > 0 && ctx.now() - a.sent_at < cfg_.bulk_retry_timeout) continue;
    a.count += 1;
    a.sent_at = ctx.now();
    PullRequest req;
    req.requester = self_;
    req.mode = PullMode::Random;
    req.batch = next_batch_++;
    req.attempt = a.count;
    req.wanted_digests = {d};
    for (auto to : uncertified_random_pull(rng_, self_, cfg_)) ctx.send(to, req);
    sent = true;
  }
  if (sent) ctx.set_timer(cfg_.bulk_retry_timeout, {TimerKind::PullRetry, 0});
}

// ---------------------------------------------------------------------------
// Certified

std::vector<Outgoing> certified_deterministic_pull(const Certificate& cert, ValidatorId self,
                                                   std::uint64_t batch, std::uint32_t attempt) {
  std::vector<Outgoing> out;
  PullRequest req;
  req.requester = self;
  req.mode = PullMode::Certified;
  req.batch = batch;
  req.attempt = attempt;
  req.wanted_digests = {cert.digest};
  for (auto v : cert.signers)
    if (v != self) out.push_back({v, req});
  return out;
}

CertifiedSynchronizer::CertifiedSynchronizer(ValidatorId self, const ProtocolConfig& cfg,
                                             const ValidatorOptions& opts)
    : ValidatorBase(self, cfg, AcceptRule::Explicit, opts) {}

void CertifiedSynchronizer::on_start(Context& ctx) {
  ValidatorBase::on_start(ctx);
  for (std::uint32_t k = 0; k < cfg_.n; ++k) {
    const Block* g = dag_.find_slot({ValidatorId(k), 0});
    certified_.insert(g->digest);
    certified_authors_[0].insert(ValidatorId(k));
    slot_digest_[g->slot()] = g->digest;
  }
}

bool CertifiedSynchronizer::quorum_ready(Round r) const {
  auto it = certified_authors_.find(r);
  if (it == certified_authors_.end()) return false;
  return it->second.size() >= cfg_.quorum() && it->second.count(self_);
}

std::optional<Block> CertifiedSynchronizer::make_block(Context&, Round r) {
  auto it = certified_authors_.find(r - 1);
  if (it == certified_authors_.end() || !it->second.count(self_)) return std::nullopt;
  std::vector<BlockRef> parents;
  for (const auto& author : it->second)
    parents.push_back({author, r - 1, slot_digest_.at({author, r - 1})});
  if (parents.size() < cfg_.quorum()) return std::nullopt;
  return baseline_block(self_, r, parents, cfg_.n, next_payload());
}

void CertifiedSynchronizer::adopt_own(Context&, const BlockPtr& b) {
  dag_.insert_received(b);
  own_signatures_[b->round] = {b->digest, {self_}};
  signed_.insert(b->slot());
}

void CertifiedSynchronizer::store(Context& ctx, const BlockPtr& b) {
  if (dag_.accepted(b->digest)) return;
  for (const auto& e : dag_.accept(b->digest))
    if (e.kind == AcceptKind::Store) record_accepts(ctx, {e});
  // A certified block's parents were accepted by its honest signers.
  for (const auto& p : b->parents) accept_certified(ctx, p.digest, p.slot(), {});
}

void CertifiedSynchronizer::accept_certified(Context& ctx, const BlockDigest& d, Slot slot,
                                             std::set<ValidatorId> holders) {
  if (!certified_.insert(d).second) return;
  certified_authors_[slot.round].insert(slot.author);
  slot_digest_[slot] = d;
  record_accepts(ctx, {{AcceptKind::Accept, d, slot}});
  if (BlockPtr b = dag_.find_ptr(d)) {
    store(ctx, b);
  } else {
    missing_.emplace(d, Missing{slot, std::move(holders), Micros{0}, 0});
  }
  request_tick(ctx);
}

void CertifiedSynchronizer::try_sign(Context& ctx) {
  for (auto it = unsigned_.begin(); it != unsigned_.end();) {
    const Block* b = dag_.find(*it);
    if (!b || signed_.count(b->slot())) {
      it = unsigned_.erase(it);
      continue;
    }
    bool ready = std::all_of(b->parents.begin(), b->parents.end(),
                             [&](const BlockRef& p) { return certified(p.digest); });
    if (!ready) {
      ++it;
      continue;
    }
    signed_.insert(b->slot());
    ctx.send(b->author, SignatureMsg{b->digest, b->slot(), self_});
    it = unsigned_.erase(it);
  }
}

void CertifiedSynchronizer::on_block_delivered(Context& ctx, ValidatorId, const BlockMessage& msg) {
  if (halted_) return;
  const auto& b = msg.block;
  if (auto v = validate_block(*b, cfg_); v != Validation::Ok) {
    record_drop(ctx, v);
    return;
  }
  if (dag_.insert_received(b) == InsertResult::DuplicateIgnored) return;
  if (certified(b->digest)) {
    missing_.erase(b->digest);
    store(ctx, b);
  } else if (!signed_.count(b->slot())) {
    unsigned_.insert(b->digest);
  }
  request_tick(ctx);
}

void CertifiedSynchronizer::on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) {
  if (halted_) return;
  PullResponse resp;
  resp.responder = self_;
  for (const auto& d : req.wanted_digests)
    if (auto b = dag_.find_ptr(d)) resp.blocks.push_back(b);
  if (!resp.blocks.empty()) ctx.send(from, std::move(resp));
}

void CertifiedSynchronizer::on_pull_response(Context& ctx, ValidatorId from, const PullResponse& resp) {
  for (const auto& b : resp.blocks) on_block_delivered(ctx, from, BlockMessage{b});
}

void CertifiedSynchronizer::on_signature(Context& ctx, ValidatorId, const SignatureMsg& msg) {
  if (halted_) return;
  auto it = own_signatures_.find(msg.slot.round);
  if (it == own_signatures_.end() || it->second.first != msg.digest) return;
  auto& signers = it->second.second;
  const bool had_quorum = signers.size() >= cfg_.quorum();
  signers.insert(msg.signer);
  if (had_quorum || signers.size() < cfg_.quorum()) return;
  Certificate cert{msg.digest, msg.slot, signers};
  ctx.broadcast(CertificateMsg{cert});
  accept_certified(ctx, cert.digest, cert.slot, cert.signers);
}

void CertifiedSynchronizer::on_certificate(Context& ctx, ValidatorId, const CertificateMsg& msg) {
  if (halted_) return;
  if (msg.cert.signers.size() < cfg_.quorum()) return;
  // Accepted earlier through a child: the signers are now known holders.
  if (auto it = missing_.find(msg.cert.digest); it != missing_.end() && it->second.holders.empty())
    it->second.holders = msg.cert.signers;
  accept_certified(ctx, msg.cert.digest, msg.cert.slot, msg.cert.signers);
}

void CertifiedSynchronizer::pull_step(Context& ctx) {
  try_sign(ctx);
  bool sent = false;
  for (auto it = missing_.begin(); it != missing_.end();) {
    if (dag_.received(it->first)) {
      it = missing_.erase(it);
      continue;
    }
    auto& m = it->second;
    if (m.attempt > 0 && ctx.now() - m.sent_at < cfg_.live_retry_timeout) {
      ++it;
      continue;
    }
    m.attempt += 1;
    m.sent_at = ctx.now();
    Certificate cert{it->first, m.slot, m.holders};
    if (cert.signers.empty())
      for (std::uint32_t k = 0; k < cfg_.n; ++k) cert.signers.insert(ValidatorId(k));
    for (auto& out : certified_deterministic_pull(cert, self_, next_batch_++, m.attempt))
      ctx.send(out.to, std::move(out.request));
    sent = true;
    ++it;
  }
  if (sent) ctx.set_timer(cfg_.live_retry_timeout, {TimerKind::PullRetry, 0});
}

}  // namespace bsync
