#pragma once

#include <functional>
#include <map>
#include <set>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "bsync/adversary.hpp"
#include "bsync/messages.hpp"
#include "bsync/synchronizer.hpp"
#include "bsync/trace.hpp"

namespace bsync {

/// Proposes a delivery time for a message; the network clamps it.
using SchedulerPolicy = std::function<std::optional<Micros>(const Message&, std::mt19937_64&)>;

struct NetworkModel {
  std::vector<std::vector<Micros>> delay;  // δ_ij
  Micros delta_bound{0};                   // Δ
  Micros gst{0};
  SchedulerPolicy scheduler;  // empty: deliver after δ_ij

  static NetworkModel uniform(std::uint32_t n, Micros delta);
  std::uint32_t size() const { return static_cast<std::uint32_t>(delay.size()); }
  Micros max_delay() const;
  /// δ_ij < δ_ik + δ_kj for all distinct i, j, k.
  bool satisfies_triangle() const;
  /// Clamps a proposal into [sent + δ_ij, max(gst, sent) + Δ].
  Micros delivery_time(const Message& m, std::optional<Micros> proposed) const;
};

/// Before GST each message lands at a uniformly random time inside its
/// allowed window; afterwards it takes δ_ij.
SchedulerPolicy pre_gst_chaos(const NetworkModel& net);

class NonQuiescentTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind { Deliver = 0, Timer = 1, Inject = 2 };

struct SimEvent {
  Micros time{0};
  EventKind kind = EventKind::Deliver;
  std::uint32_t sender = 0;  // message sender, timer owner, or injected target
  std::uint64_t seq = 0;
  std::uint32_t target = 0;
  std::variant<Message, TimerTag> body;
};

/// Deterministic single-threaded discrete-event loop.
class Simulator {
 public:
  Simulator(NetworkModel net, std::vector<std::unique_ptr<Synchronizer>> validators,
            std::vector<AdversaryPolicy> policies, std::uint64_t seed);
  ~Simulator();

  /// Runs to quiescence. Throws NonQuiescentTimeout past `horizon`.
  void run(Micros horizon);
  /// Runs until `done` holds after an event, or to quiescence.
  void run_until(const std::function<bool()>& done, Micros horizon);

  Micros now() const { return now_; }
  bool halted(ValidatorId v) const { return halted_[v.value]; }
  Synchronizer& validator(ValidatorId v) { return *validators_[v.value]; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::vector<TraceRecord> take_trace() { return std::move(trace_); }
  const NetworkModel& network() const { return net_; }

  /// Schedules a message at its (clamped) delivery time; returns that time.
  Micros send(Message msg);

 private:
  class NodeContext;
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const;
  };

  void broadcast_from(ValidatorId from, const Payload& payload);
  void send_block(ValidatorId from, ValidatorId to, const BlockPtr& b, Micros extra);
  void push(SimEvent e);
  void step(const SimEvent& e);
  void record_message(TraceKind kind, const Message& m, std::int64_t at);
  void observe_strong_links(std::uint32_t adversary, const Block& b);
  void release_paced(std::uint32_t adversary, const BlockPtr& b);

  NetworkModel net_;
  std::vector<std::unique_ptr<Synchronizer>> validators_;
  std::vector<AdversaryPolicy> policies_;
  std::vector<std::optional<HoardBuffer>> hoards_;
  struct Pacing {
    std::set<Round> linked;           // own rounds seen as a strong link
    std::map<Round, BlockPtr> held;  // waiting for the previous round's link
  };
  std::vector<Pacing> pacing_;
  std::vector<std::unique_ptr<NodeContext>> contexts_;
  std::vector<bool> halted_;
  std::mt19937_64 rng_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::vector<TraceRecord> trace_;
  Micros now_{0};
  std::uint64_t seq_ = 0;
  bool started_ = false;
};

}  // namespace bsync
