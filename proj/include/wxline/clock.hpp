// Injectable time source shared by the node simulator, the collector and
// the page regenerator.
//
// All blocking in those loops goes through Clock::wait_until so that a
// VirtualClock can run hours of station time in milliseconds while keeping
// every timestamp exact.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stop_token>
#include <thread>
#include <vector>

#include "wxline/timefmt.hpp"

namespace wxline {

class Clock;

// Registration of one thread of control with a clock. A VirtualClock only
// advances time once every enrolled actor is blocked in wait_until, so an
// actor must be enrolled before the thread that runs it starts, and bound
// from inside that thread.
class Enrollment {
 public:
  Enrollment() = default;
  Enrollment(Clock* clock, std::uint64_t id) : clock_(clock), id_(id) {}
  Enrollment(Enrollment&& other) noexcept;
  Enrollment& operator=(Enrollment&& other) noexcept;
  Enrollment(const Enrollment&) = delete;
  Enrollment& operator=(const Enrollment&) = delete;
  ~Enrollment();

  // Associates the calling thread with this actor.
  void bind() const;

 private:
  void release();
  Clock* clock_ = nullptr;
  std::uint64_t id_ = 0;
};

class Clock {
 public:
  virtual ~Clock() = default;

  virtual SimTime now() const = 0;

  // Blocks until `ready()` holds or `deadline` passes; returns ready().
  // `ready` is evaluated with the clock's internal lock held, so code that
  // changes what it observes must call notify() afterwards.
  virtual bool wait_until(SimTime deadline, const std::function<bool()>& ready) = 0;
  virtual void notify() = 0;

  // Steady-clock instant at which `t` is reached. Only meaningful for clocks
  // tied to wall time; VirtualClock throws std::logic_error.
  virtual std::chrono::steady_clock::time_point wall_deadline(SimTime t) const = 0;

  virtual Enrollment enroll() { return {}; }

  // Returns false if `stop` fired before `t`.
  bool sleep_until(SimTime t, std::stop_token stop);
  bool sleep_for(SimDuration d, std::stop_token stop) { return sleep_until(now() + d, std::move(stop)); }

 protected:
  friend class Enrollment;
  virtual void bind_actor(std::uint64_t) {}
  virtual void retire_actor(std::uint64_t) {}
};

// Wall-driven clock whose station time runs `scale` times faster than real
// time, starting at `origin`.
class ScaledSystemClock final : public Clock {
 public:
  explicit ScaledSystemClock(double scale = 1.0);
  ScaledSystemClock(double scale, SimTime origin);

  SimTime now() const override;
  bool wait_until(SimTime deadline, const std::function<bool()>& ready) override;
  void notify() override;
  std::chrono::steady_clock::time_point wall_deadline(SimTime t) const override;

  double scale() const { return scale_; }

 private:
  double scale_;
  SimTime origin_;
  std::chrono::steady_clock::time_point wall_origin_;
  std::mutex mutex_;
  std::condition_variable cv_;
};

// Discrete-event clock. Exactly one enrolled actor runs at a time; when it
// blocks, the lowest-id actor whose condition holds is resumed, otherwise
// time jumps to the earliest pending deadline (ties broken by actor id).
// Given deterministic actors, a run is fully reproducible.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(SimTime start);

  SimTime now() const override;
  bool wait_until(SimTime deadline, const std::function<bool()>& ready) override;
  void notify() override;
  std::chrono::steady_clock::time_point wall_deadline(SimTime t) const override;
  Enrollment enroll() override;

 protected:
  void bind_actor(std::uint64_t id) override;
  void retire_actor(std::uint64_t id) override;

 private:
  enum class State { kRunning, kWaiting, kResumed };
  struct Actor {
    State state = State::kRunning;
    SimTime deadline{};
    const std::function<bool()>* ready = nullptr;
    std::condition_variable cv;
  };

  void schedule_locked();
  void resume_locked(Actor& actor);

  mutable std::mutex mutex_;
  std::condition_variable observers_;
  SimTime now_;
  std::map<std::uint64_t, Actor> actors_;
  std::uint64_t next_id_ = 1;
  int running_ = 0;
};

// Starts `body` on a new thread enrolled with `clock`.
std::jthread spawn_actor(Clock& clock, std::function<void()> body);

// Starts several actors together. Until join(), the group holds an
// enrollment of its own, so a VirtualClock cannot move while actors spawned
// early are already asleep and later ones do not exist yet.
class ActorGroup {
 public:
  explicit ActorGroup(Clock& clock) : clock_(clock), hold_(clock.enroll()) {}
  ActorGroup(const ActorGroup&) = delete;
  ActorGroup& operator=(const ActorGroup&) = delete;
  ~ActorGroup() { join(); }

  void spawn(std::function<void()> body) { threads_.push_back(spawn_actor(clock_, std::move(body))); }

  // Lets time run and waits for every actor to return.
  void join() {
    hold_ = Enrollment();
    threads_.clear();
  }

 private:
  Clock& clock_;
  Enrollment hold_;
  std::vector<std::jthread> threads_;
};

}  // namespace wxline
