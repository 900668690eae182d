#pragma once

#include <memory>
#include <random>

#include "bsync/consensus.hpp"
#include "bsync/dag_store.hpp"
#include "bsync/messages.hpp"
#include "bsync/trace.hpp"

namespace bsync {

enum class TimerKind { Tick, PullRetry, LeaderTimeout };

struct TimerTag {
  TimerKind kind = TimerKind::Tick;
  Round round = 0;
};

/// What a validator may do from inside a callback. Implemented by the
/// simulator; time, sender and trace bookkeeping happen there.
class Context {
 public:
  virtual ~Context() = default;
  virtual Micros now() const = 0;
  virtual void send(ValidatorId to, Payload payload) = 0;
  /// Best-effort broadcast to every other validator.
  virtual void broadcast(Payload payload) = 0;
  virtual void set_timer(Micros delay, TimerTag tag) = 0;
  /// Appends an observation; `t` and `v` are filled in by the context.
  virtual void record(TraceRecord r) = 0;
  /// The validator stops: later inputs are discarded.
  virtual void halt() = 0;
};

/// Common callback surface of every synchronizer.
class Synchronizer {
 public:
  virtual ~Synchronizer() = default;

  virtual void on_start(Context& ctx) = 0;
  virtual void on_block_delivered(Context& ctx, ValidatorId from, const BlockMessage& msg) = 0;
  virtual void on_pull_request(Context& ctx, ValidatorId from, const PullRequest& req) = 0;
  virtual void on_pull_response(Context& ctx, ValidatorId from, const PullResponse& resp) = 0;
  virtual void on_signature(Context&, ValidatorId, const SignatureMsg&) {}
  virtual void on_certificate(Context&, ValidatorId, const CertificateMsg&) {}
  virtual void on_timer(Context& ctx, TimerTag tag) = 0;
  virtual void on_round_advance(Context&, Round) {}

  /// Dispatches a delivered message to the matching callback.
  void deliver(Context& ctx, const Message& msg);

  virtual ValidatorId id() const = 0;
  virtual Round current_round() const = 0;
  virtual const DagState& dag() const = 0;
  virtual const CommitTracker& commits() const = 0;
};

struct ValidatorOptions {
  /// No block is created beyond this round.
  Round max_round = 100;
  /// Crash fault: halt instead of idling once max_round is done.
  bool halt_at_max = false;
  std::uint64_t seed = 0;
};

/// Shared round loop: genesis, zero-delay ticks that batch same-instant
/// deliveries, threshold clock, quorum bookkeeping, leader timeouts, commits.
class ValidatorBase : public Synchronizer {
 public:
  ValidatorBase(ValidatorId self, const ProtocolConfig& cfg, AcceptRule rule,
                const ValidatorOptions& opts);

  void on_start(Context& ctx) override;
  void on_timer(Context& ctx, TimerTag tag) override;

  ValidatorId id() const override { return self_; }
  Round current_round() const override { return round_; }
  const DagState& dag() const override { return dag_; }
  const CommitTracker& commits() const override { return commits_; }

 protected:
  /// Threshold-clock condition for leaving round r.
  virtual bool quorum_ready(Round r) const;
  /// Builds the own round-r block, or nullopt to wait.
  virtual std::optional<Block> make_block(Context& ctx, Round r) = 0;
  /// Stores the own freshly created block. Default: insert and accept.
  virtual void adopt_own(Context& ctx, const BlockPtr& b);
  /// Issues whatever pulls are due.
  virtual void pull_step(Context& ctx) = 0;

  void request_tick(Context& ctx);
  void progress(Context& ctx);
  void record_accepts(Context& ctx, const std::vector<AcceptEvent>& events);
  void record_block(Context& ctx, TraceKind kind, const Block& b);
  void record_commit(Context& ctx, const CommitRecord& rec);
  std::vector<std::uint8_t> next_payload();

  ValidatorId self_;
  ProtocolConfig cfg_;
  ValidatorOptions opts_;
  DagState dag_;
  CommitTracker commits_;
  std::mt19937_64 rng_;
  Round round_ = 0;
  Round quorum_recorded_ = kNoRound;
  bool tick_pending_ = false;
  bool halted_ = false;
  std::uint64_t payload_counter_ = 0;
};

}  // namespace bsync
