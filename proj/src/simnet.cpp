#include "bsync/simnet.hpp"

#include <algorithm>
#include <tuple>

#include "bsync/pull.hpp"

namespace bsync {

NetworkModel NetworkModel::uniform(std::uint32_t n, Micros delta) {
  NetworkModel net;
  net.delay.assign(n, std::vector<Micros>(n, delta));
  for (std::uint32_t i = 0; i < n; ++i) net.delay[i][i] = Micros::zero();
  net.delta_bound = delta;
  return net;
}

Micros NetworkModel::max_delay() const {
  Micros m = Micros::zero();
  for (const auto& row : delay)
    for (auto d : row) m = std::max(m, d);
  return m;
}

bool NetworkModel::satisfies_triangle() const {
  const auto n = size();
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      for (std::uint32_t k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        if (delay[i][j] >= delay[i][k] + delay[k][j]) return false;
      }
  return true;
}

Micros NetworkModel::delivery_time(const Message& m, std::optional<Micros> proposed) const {
  const Micros lower = m.sent_at + delay[m.sender.value][m.receiver.value];
  const Micros upper = std::max(gst, m.sent_at) + delta_bound;
  if (!proposed) return lower;
  return std::clamp(*proposed, lower, std::max(lower, upper));
}

SchedulerPolicy pre_gst_chaos(const NetworkModel& net) {
  const Micros gst = net.gst;
  const Micros bound = net.delta_bound;
  return [gst, bound](const Message& m, std::mt19937_64& rng) -> std::optional<Micros> {
    if (m.sent_at >= gst) return std::nullopt;
    const Micros upper = std::max(gst, m.sent_at) + bound;
    const auto span = static_cast<std::uint64_t>((upper - m.sent_at).count()) + 1;
    return m.sent_at + Micros(static_cast<std::int64_t>(uniform_below(rng, span)));
  };
}

class Simulator::NodeContext : public Context {
 public:
  NodeContext(Simulator& sim, ValidatorId self) : sim_(sim), self_(self) {}

  Micros now() const override { return sim_.now_; }
  void send(ValidatorId to, Payload payload) override {
    sim_.send(Message{self_, to, std::move(payload), sim_.now_});
  }
  void broadcast(Payload payload) override { sim_.broadcast_from(self_, payload); }
  void set_timer(Micros delay, TimerTag tag) override {
    SimEvent e;
    e.time = sim_.now_ + delay;
    e.kind = EventKind::Timer;
    e.sender = self_.value;
    e.target = self_.value;
    e.body = tag;
    sim_.push(std::move(e));
  }
  void record(TraceRecord r) override {
    r.t = sim_.now_.count();
    r.v = self_.value;
    sim_.trace_.push_back(std::move(r));
  }
  void halt() override { sim_.halted_[self_.value] = true; }

 private:
  Simulator& sim_;
  ValidatorId self_;
};

bool Simulator::Later::operator()(const SimEvent& a, const SimEvent& b) const {
  return std::tie(a.time, a.kind, a.sender, a.seq) > std::tie(b.time, b.kind, b.sender, b.seq);
}

Simulator::Simulator(NetworkModel net, std::vector<std::unique_ptr<Synchronizer>> validators,
                     std::vector<AdversaryPolicy> policies, std::uint64_t seed)
    : net_(std::move(net)),
      validators_(std::move(validators)),
      policies_(std::move(policies)),
      halted_(validators_.size(), false),
      rng_(seed) {
  policies_.resize(validators_.size(), Honest{});
  if (net_.size() != validators_.size())
    throw std::invalid_argument("network size does not match validator count");
  for (std::uint32_t i = 0; i < validators_.size(); ++i) {
    contexts_.push_back(std::make_unique<NodeContext>(*this, ValidatorId(i)));
    if (auto* h = std::get_if<HoardAndDump>(&policies_[i]))
      hoards_.emplace_back(HoardBuffer(*h));
    else
      hoards_.emplace_back(std::nullopt);
  }
  pacing_.resize(validators_.size());
}

Simulator::~Simulator() = default;

void Simulator::push(SimEvent e) {
  e.seq = seq_++;
  queue_.push(std::move(e));
}

void Simulator::record_message(TraceKind kind, const Message& m, std::int64_t at) {
  TraceRecord r;
  r.kind = kind;
  r.t = now_.count();
  r.v = kind == TraceKind::Send ? m.sender.value : m.receiver.value;
  r.peer = kind == TraceKind::Send ? m.receiver.value : m.sender.value;
  r.msg = kind_of(m.payload);
  if (kind == TraceKind::Send) r.at = at;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BlockMessage>) {
          r.digest = p.block->digest;
          r.author = p.block->author.value;
          r.round = p.block->round;
        } else if constexpr (std::is_same_v<T, PullRequest>) {
          r.mode = p.mode;
          r.batch = p.batch;
          r.attempt = p.attempt;
          r.entries = p.wanted_slots;
          if (p.wanted_digests.size() == 1) r.digest = p.wanted_digests.front();
        } else if constexpr (std::is_same_v<T, PullResponse>) {
          for (const auto& b : p.blocks) r.entries.push_back(b->slot());
        } else if constexpr (std::is_same_v<T, SignatureMsg>) {
          r.digest = p.digest;
          r.author = p.slot.author.value;
          r.round = p.slot.round;
        } else {
          r.digest = p.cert.digest;
          r.author = p.cert.slot.author.value;
          r.round = p.cert.slot.round;
        }
      },
      m.payload);
  trace_.push_back(std::move(r));
}

Micros Simulator::send(Message msg) {
  std::optional<Micros> proposed;
  if (net_.scheduler) proposed = net_.scheduler(msg, rng_);
  const Micros at = net_.delivery_time(msg, proposed);
  record_message(TraceKind::Send, msg, at.count());
  SimEvent e;
  e.time = at;
  e.kind = EventKind::Deliver;
  e.sender = msg.sender.value;
  e.target = msg.receiver.value;
  e.body = std::move(msg);
  push(std::move(e));
  return at;
}

void Simulator::send_block(ValidatorId from, ValidatorId to, const BlockPtr& b, Micros extra) {
  send(Message{from, to, BlockMessage{b}, now_ + extra});
}

void Simulator::broadcast_from(ValidatorId from, const Payload& payload) {
  const auto n = static_cast<std::uint32_t>(validators_.size());
  const auto* block_msg = std::get_if<BlockMessage>(&payload);
  const auto& policy = policies_[from.value];

  if (block_msg) {
    if (const auto* pi = std::get_if<PullInduction>(&policy)) {
      const auto& b = block_msg->block;
      const auto targets = pull_induction_targets(*pi, b->round, from, n);
      auto& pacing = pacing_[from.value];
      const bool hold = pi->paced && b->round > 1 && !pacing.linked.count(b->round - 1);
      if (hold) pacing.held[b->round] = b;
      for (std::uint32_t k = 0; k < n; ++k) {
        const ValidatorId to(k);
        if (to == from) continue;
        if (targets.count(to)) {
          if (!hold) send_block(from, to, b, Micros::zero());
        } else if (pi->lag) {
          send_block(from, to, block_msg->block, *pi->lag);
        } else {
          record_message(TraceKind::Send, Message{from, to, payload, now_}, -1);
        }
      }
      return;
    }
    if (auto& hoard = hoards_[from.value]) {
      for (const auto& b : hoard->hoard_and_dump(block_msg->block))
        for (std::uint32_t k = 0; k < n; ++k)
          if (k != from.value) send_block(from, ValidatorId(k), b, Micros::zero());
      return;
    }
  }
  for (std::uint32_t k = 0; k < n; ++k)
    if (k != from.value) send(Message{from, ValidatorId(k), payload, now_});
}

void Simulator::release_paced(std::uint32_t adversary, const BlockPtr& b) {
  const auto& pi = std::get<PullInduction>(policies_[adversary]);
  const auto n = static_cast<std::uint32_t>(validators_.size());
  for (auto to : pull_induction_targets(pi, b->round, ValidatorId(adversary), n))
    if (to.value != adversary) send_block(ValidatorId(adversary), to, b, Micros::zero());
}

void Simulator::observe_strong_links(std::uint32_t adversary, const Block& b) {
  const auto* pi = std::get_if<PullInduction>(&policies_[adversary]);
  if (!pi || !pi->paced || b.author.value == adversary) return;
  auto& pacing = pacing_[adversary];
  for (const auto& p : b.parents) {
    if (p.author.value != adversary || !pacing.linked.insert(p.round).second) continue;
    auto it = pacing.held.find(p.round + 1);
    if (it == pacing.held.end()) continue;
    BlockPtr held = it->second;
    pacing.held.erase(it);
    release_paced(adversary, held);
  }
}

void Simulator::step(const SimEvent& e) {
  if (halted_[e.target]) return;
  auto& ctx = *contexts_[e.target];
  auto& node = *validators_[e.target];
  switch (e.kind) {
    case EventKind::Deliver: {
      const auto& msg = std::get<Message>(e.body);
      record_message(TraceKind::Deliver, msg, -1);
      if (const auto* bm = std::get_if<BlockMessage>(&msg.payload))
        observe_strong_links(e.target, *bm->block);
      else if (const auto* resp = std::get_if<PullResponse>(&msg.payload))
        for (const auto& b : resp->blocks)
          if (b) observe_strong_links(e.target, *b);
      node.deliver(ctx, msg);
      break;
    }
    case EventKind::Timer:
      node.on_timer(ctx, std::get<TimerTag>(e.body));
      break;
    case EventKind::Inject:
      node.on_start(ctx);
      break;
  }
}

void Simulator::run_until(const std::function<bool()>& done, Micros horizon) {
  if (!started_) {
    started_ = true;
    for (std::uint32_t i = 0; i < validators_.size(); ++i) {
      SimEvent e;
      e.time = Micros::zero();
      e.kind = EventKind::Inject;
      e.sender = i;
      e.target = i;
      e.body = TimerTag{};
      push(std::move(e));
    }
  }
  while (!queue_.empty()) {
    if (done && done()) return;
    const SimEvent& top = queue_.top();
    if (top.time > horizon)
      throw NonQuiescentTimeout("simulation still active at horizon " +
                                std::to_string(horizon.count()) + "us");
    SimEvent e = top;
    queue_.pop();
    now_ = e.time;
    step(e);
  }
}

void Simulator::run(Micros horizon) { run_until(nullptr, horizon); }

}  // namespace bsync
