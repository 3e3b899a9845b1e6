#include "wxline/clock.hpp"

#include <stdexcept>

namespace wxline {

namespace {

struct ActorBinding {
  const Clock* clock = nullptr;
  std::uint64_t id = 0;
};

thread_local ActorBinding tls_binding;

}  // namespace

Enrollment::Enrollment(Enrollment&& other) noexcept : clock_(other.clock_), id_(other.id_) {
  other.clock_ = nullptr;
}

Enrollment& Enrollment::operator=(Enrollment&& other) noexcept {
  if (this != &other) {
    release();
    clock_ = other.clock_;
    id_ = other.id_;
    other.clock_ = nullptr;
  }
  return *this;
}

Enrollment::~Enrollment() { release(); }

void Enrollment::bind() const {
  if (clock_ != nullptr) clock_->bind_actor(id_);
}

void Enrollment::release() {
  if (clock_ != nullptr) {
    clock_->retire_actor(id_);
    clock_ = nullptr;
  }
}

bool Clock::sleep_until(SimTime t, std::stop_token stop) {
  std::stop_callback wake(stop, [this] { notify(); });
  return !wait_until(t, [&stop] { return stop.stop_requested(); });
}

std::jthread spawn_actor(Clock& clock, std::function<void()> body) {
  Enrollment enrollment = clock.enroll();
  return std::jthread([enrollment = std::move(enrollment), body = std::move(body)]() mutable {
    const Enrollment self = std::move(enrollment);
    self.bind();
    body();
  });
}

// ---------------------------------------------------------------------------

ScaledSystemClock::ScaledSystemClock(double scale)
    : ScaledSystemClock(scale, std::chrono::time_point_cast<SimDuration>(std::chrono::system_clock::now())) {}

ScaledSystemClock::ScaledSystemClock(double scale, SimTime origin)
    : scale_(scale), origin_(origin), wall_origin_(std::chrono::steady_clock::now()) {
  if (!(scale >= 1.0)) throw std::invalid_argument("time scale must be >= 1");
}

SimTime ScaledSystemClock::now() const {
  const std::chrono::duration<double, std::micro> wall = std::chrono::steady_clock::now() - wall_origin_;
  return origin_ + SimDuration(static_cast<SimDuration::rep>(wall.count() * scale_));
}

std::chrono::steady_clock::time_point ScaledSystemClock::wall_deadline(SimTime t) const {
  const double us = static_cast<double>((t - origin_).count()) / scale_;
  // Roughly a century; anything later is treated as "never".
  if (us > 3e15) return std::chrono::steady_clock::time_point::max();
  return wall_origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double, std::micro>(us));
}

bool ScaledSystemClock::wait_until(SimTime deadline, const std::function<bool()>& ready) {
  std::unique_lock lock(mutex_);
  if (deadline == kSimTimeMax) {
    cv_.wait(lock, ready);
    return true;
  }
  return cv_.wait_until(lock, wall_deadline(deadline), ready);
}

void ScaledSystemClock::notify() {
  // Taking the lock orders this call after any waiter's predicate check.
  { std::lock_guard lock(mutex_); }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------

VirtualClock::VirtualClock(SimTime start) : now_(start) {}

SimTime VirtualClock::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

std::chrono::steady_clock::time_point VirtualClock::wall_deadline(SimTime) const {
  throw std::logic_error("virtual clock has no wall-time mapping");
}

Enrollment VirtualClock::enroll() {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  actors_.try_emplace(id);
  ++running_;
  return Enrollment(this, id);
}

void VirtualClock::bind_actor(std::uint64_t id) { tls_binding = ActorBinding{this, id}; }

void VirtualClock::retire_actor(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  auto it = actors_.find(id);
  if (it == actors_.end()) return;
  if (it->second.state != State::kWaiting) --running_;
  actors_.erase(it);
  if (tls_binding.clock == this && tls_binding.id == id) tls_binding = {};
  schedule_locked();
}

bool VirtualClock::wait_until(SimTime deadline, const std::function<bool()>& ready) {
  std::unique_lock lock(mutex_);
  if (ready()) return true;

  if (tls_binding.clock != this) {
    // Not an actor: observe without influencing the schedule.
    observers_.wait(lock, [&] { return ready() || now_ >= deadline; });
    return ready();
  }

  Actor& self = actors_.at(tls_binding.id);
  if (now_ >= deadline) return false;
  self.state = State::kWaiting;
  self.deadline = deadline;
  self.ready = &ready;
  --running_;
  schedule_locked();
  self.cv.wait(lock, [&] { return self.state == State::kResumed; });
  self.state = State::kRunning;
  self.ready = nullptr;
  return ready();
}

void VirtualClock::notify() {
  {
    std::lock_guard lock(mutex_);
    schedule_locked();
  }
  observers_.notify_all();
}

void VirtualClock::resume_locked(Actor& actor) {
  actor.state = State::kResumed;
  ++running_;
  actor.cv.notify_one();
}

void VirtualClock::schedule_locked() {
  if (running_ > 0) return;
  for (auto& [id, actor] : actors_) {
    if (actor.state == State::kWaiting && ((*actor.ready)() || actor.deadline <= now_)) {
      resume_locked(actor);
      return;
    }
  }
  Actor* next = nullptr;
  for (auto& [id, actor] : actors_) {
    if (actor.state != State::kWaiting || actor.deadline == kSimTimeMax) continue;
    if (next == nullptr || actor.deadline < next->deadline) next = &actor;
  }
  if (next == nullptr) return;
  now_ = next->deadline;
  resume_locked(*next);
  observers_.notify_all();
}

}  // namespace wxline
