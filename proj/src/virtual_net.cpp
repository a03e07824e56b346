#include "tsv/virtual_net.hpp"

#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <queue>
#include <stdexcept>
#include <thread>

namespace tsv {

std::int64_t to_ns(double seconds) { return std::llround(seconds * 1e9); }

namespace {

constexpr int kScheduler = -1;

class Scheduler {
 public:
  struct Task {
    std::string role;
    bool done = false;
    bool aborted = false;
    std::uint64_t gen = 0;  // bumps invalidate pending wake-ups
    std::optional<std::string> waiting_from;
  };

  explicit Scheduler(const std::vector<EndpointProgram>& eps) {
    for (const auto& e : eps) tasks_.push_back({e.config.role, false, false, 0, std::nullopt});
  }

  double now() const { return static_cast<double>(now_) / 1e9; }

  void sleep_until(int me, std::int64_t t) {
    std::unique_lock lock(mu_);
    if (t <= now_) return;
    timers_.push({t, seq_++, me, ++tasks_[me].gen});
    yield(lock, me);
  }

  void push(int me, ConversationMessage m) {
    std::unique_lock lock(mu_);
    int to = index(m.receiver);
    channels_[{tasks_[me].role, m.receiver}].push_back(std::move(m));
    Task& r = tasks_[to];
    if (r.waiting_from == tasks_[me].role) {
      r.waiting_from.reset();
      ++r.gen;
      runnable_.push_back(to);
    }
  }

  std::optional<ConversationMessage> pop(int me, const std::string& from, std::optional<std::int64_t> deadline) {
    std::unique_lock lock(mu_);
    auto& q = channels_[{from, tasks_[me].role}];
    while (true) {
      if (!q.empty()) {
        ConversationMessage m = std::move(q.front());
        q.pop_front();
        return m;
      }
      if (deadline && *deadline <= now_) return std::nullopt;
      Task& t = tasks_[me];
      t.waiting_from = from;
      ++t.gen;
      if (deadline) timers_.push({*deadline, seq_++, me, t.gen});
      yield(lock, me);
      t.waiting_from.reset();
    }
  }

  SessionRun run(std::vector<EndpointProgram>& eps) {
    SessionRun out;
    out.outcomes.resize(eps.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      runnable_.push_back(static_cast<int>(i));
      threads.emplace_back([this, &eps, &out, i] { body(static_cast<int>(i), eps[i], out.outcomes[i]); });
    }
    std::unique_lock lock(mu_);
    while (true) {
      if (!runnable_.empty()) {
        int next = runnable_.front();
        runnable_.pop_front();
        activate(lock, next);
        ++out.steps;
        continue;
      }
      if (!timers_.empty()) {
        Timer t = timers_.top();
        timers_.pop();
        if (t.gen != tasks_[t.task].gen || tasks_[t.task].done) continue;
        ++tasks_[t.task].gen;
        now_ = std::max(now_, t.at);
        runnable_.push_back(t.task);
        continue;
      }
      bool stuck = false;
      for (std::size_t i = 0; i < tasks_.size(); ++i)
        if (!tasks_[i].done) {
          stuck = true;
          tasks_[i].aborted = true;
          activate(lock, static_cast<int>(i));
        }
      if (!stuck) break;
      out.deadlock = true;
    }
    lock.unlock();
    for (auto& th : threads) th.join();
    out.end_time = now();
    return out;
  }

 private:
  struct Timer {
    std::int64_t at;
    std::uint64_t seq;
    int task;
    std::uint64_t gen;
    bool operator>(const Timer& o) const { return std::tie(at, seq) > std::tie(o.at, o.seq); }
  };

  int index(const std::string& role) const {
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      if (tasks_[i].role == role) return static_cast<int>(i);
    throw std::invalid_argument("unknown role " + role);
  }

  void activate(std::unique_lock<std::mutex>& lock, int task) {
    active_ = task;
    cv_.notify_all();
    cv_.wait(lock, [&] { return active_ == kScheduler; });
  }

  void yield(std::unique_lock<std::mutex>& lock, int me) {
    active_ = kScheduler;
    cv_.notify_all();
    cv_.wait(lock, [&] { return active_ == me; });
    if (tasks_[me].aborted) throw Deadlock("no endpoint can make progress at t=" + format_seconds(now()));
  }

  void body(int me, EndpointProgram& ep, EndpointOutcome& out);

  std::mutex mu_;
  std::condition_variable cv_;
  int active_ = kScheduler;
  std::int64_t now_ = 0;
  std::uint64_t seq_ = 0;
  std::vector<Task> tasks_;
  std::deque<int> runnable_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::map<std::pair<std::string, std::string>, std::deque<ConversationMessage>> channels_;
};

class VirtualPort : public Port {
 public:
  VirtualPort(Scheduler& s, int me) : s_(s), me_(me) {}
  double now() override { return s_.now(); }
  void sleep_until(double t) override { s_.sleep_until(me_, to_ns(t)); }
  void push(ConversationMessage m) override { s_.push(me_, std::move(m)); }
  std::optional<ConversationMessage> pop(const std::string& from, std::optional<double> deadline) override {
    std::optional<std::int64_t> d;
    if (deadline) d = to_ns(*deadline);
    return s_.pop(me_, from, d);
  }
  double tick() const override { return 1e-9; }

 private:
  Scheduler& s_;
  int me_;
};

void Scheduler::body(int me, EndpointProgram& ep, EndpointOutcome& out) {
  out.role = ep.config.role;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ == me; });
  }
  try {
    Conversation c(std::make_unique<VirtualPort>(*this, me), ep.config);
    if (tasks_[me].aborted) throw Deadlock("no endpoint can make progress");
    ep.program(c);
    out.completed = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  } catch (...) {
    out.error = "unknown exception";
  }
  std::unique_lock lock(mu_);
  out.finished_at = now();
  tasks_[me].done = true;
  active_ = kScheduler;
  cv_.notify_all();
}

}  // namespace

SessionRun run_virtual(std::vector<EndpointProgram> endpoints) {
  Scheduler s(endpoints);
  return s.run(endpoints);
}

}  // namespace tsv
