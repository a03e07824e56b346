#include "tsv/runtime.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>

namespace tsv {
namespace {

void put_u32(std::string& out, std::uint32_t n) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
}

std::uint32_t get_u32(std::string_view in) {
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(in[i]);
  return n;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    out.emplace_back(s.substr(start, p - start));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

ObservedEvent expected_event(const MonitorState& m, double t) {
  ObservedEvent e;
  e.time = t;
  auto out = m.automaton->outgoing(m.current);
  if (!out.empty()) {
    e.dir = out.front()->action.dir;
    e.partner = out.front()->action.partner;
    e.label = out.front()->action.label;
    e.sorts = out.front()->action.sorts;
  }
  return e;
}

}  // namespace

std::string encode_body(const ConversationMessage& m) {
  if (m.sorts.size() != m.values.size()) throw std::invalid_argument("sorts and values differ in length");
  std::string sorts;
  for (std::size_t i = 0; i < m.sorts.size(); ++i) sorts += (i ? "," : "") + m.sorts[i];
  std::string out = m.conversation + '\t' + m.protocol + '\t' + m.sender + '\t' + m.receiver + '\t' + m.label +
                    '\t' + sorts + '\t' + format_seconds(m.send_time) + '\n';
  for (const auto& v : m.values) {
    put_u32(out, static_cast<std::uint32_t>(v.size()));
    out += v;
  }
  return out;
}

ConversationMessage decode_body(std::string_view body) {
  std::size_t nl = body.find('\n');
  if (nl == std::string_view::npos) throw std::invalid_argument("frame without header line");
  auto f = split(body.substr(0, nl), '\t');
  if (f.size() != 7) throw std::invalid_argument("header needs 7 fields");
  ConversationMessage m{f[0], f[1], f[2], f[3], f[4], {}, {}, 0};
  for (const auto& s : {m.conversation, m.sender, m.receiver, m.label})
    if (s.empty()) throw std::invalid_argument("empty header field");
  if (!f[5].empty()) m.sorts = split(f[5], ',');
  const char* end = f[6].data() + f[6].size();
  auto [p, ec] = std::from_chars(f[6].data(), end, m.send_time);
  if (ec != std::errc() || p != end) throw std::invalid_argument("bad send timestamp");
  std::string_view rest = body.substr(nl + 1);
  while (!rest.empty()) {
    if (rest.size() < 4) throw std::invalid_argument("truncated value length");
    std::uint32_t n = get_u32(rest);
    if (rest.size() < 4 + std::size_t{n}) throw std::invalid_argument("truncated value");
    m.values.emplace_back(rest.substr(4, n));
    rest.remove_prefix(4 + n);
  }
  if (m.values.size() != m.sorts.size()) throw std::invalid_argument("sorts and values differ in length");
  return m;
}

std::string frame(std::string_view body) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out += body;
  return out;
}

std::optional<std::string> take_frame(std::string& buffer) {
  if (buffer.size() < 4) return std::nullopt;
  std::uint32_t n = get_u32(buffer);
  if (buffer.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string body = buffer.substr(4, n);
  buffer.erase(0, 4 + std::size_t{n});
  return body;
}

VerdictError::VerdictError(MonitorVerdict v)
    : std::runtime_error(to_string(v.kind) + (v.expected.empty() ? "" : ": expected " + v.expected) +
                         (v.got.empty() ? "" : ", got " + v.got) +
                         (v.guard ? ": " + to_string(*v.guard) + " at x=" + format_seconds(v.clock) : "") +
                         (v.kind == VerdictKind::TimeoutException ? " at " + format_seconds(v.deadline) : "")),
      verdict_(std::move(v)) {}

VerdictKind LogEntry::kind() const {
  if (verdict) return verdict->kind;
  if (shadow) return shadow->kind;
  return VerdictKind::Ok;
}

std::string LogEntry::line() const {
  MonitorVerdict v;
  v.kind = kind();
  return log_line(ts, conversation, role, event, clock, v);
}

void EventLog::add(LogEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

std::vector<LogEntry> EventLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::vector<std::string> EventLog::lines() const {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.line());
  return out;
}

Conversation::Conversation(std::unique_ptr<Port> port, EndpointConfig cfg) : port_(std::move(port)), cfg_(std::move(cfg)) {
  if (cfg_.monitor) monitor_ = start_session(cfg_.monitor->automaton, cfg_.monitor->epsilon, cfg_.monitor->mode);
  if (cfg_.shadow) shadow_ = start_session(cfg_.shadow->automaton, cfg_.shadow->epsilon, MonitorMode::Detect);
}

Conversation::Conversation(Conversation&&) noexcept = default;
Conversation::~Conversation() = default;

double Conversation::now() { return port_->now(); }

std::optional<double> Conversation::limit(bool* is_timeout) {
  std::optional<double> at;
  *is_timeout = false;
  if (!budgets_.empty()) at = *std::min_element(budgets_.begin(), budgets_.end());
  if (monitor_ && monitor_->mode == MonitorMode::PreventRecover &&
      fired_ != std::make_pair(monitor_->current, monitor_->last_reset)) {
    if (auto d = state_deadline(*monitor_)) {
      double t = *d + monitor_->epsilon;
      if (!at || t <= *at) at = t, *is_timeout = true;
    }
  }
  return at;
}

void Conversation::fire(bool is_timeout, double at) {
  if (!is_timeout) throw BudgetInterrupt{at};
  fired_ = {monitor_->current, monitor_->last_reset};
  MonitorVerdict v = on_timeout(*monitor_, at);
  ObservedEvent e = expected_event(*monitor_, at);
  record(e, monitor_->clock_at(at), v);
  throw VerdictError(v);
}

void Conversation::wait_until(double t) {
  bool is_timeout;
  auto at = limit(&is_timeout);
  if (at && t > *at + port_->tick() / 2) {
    port_->sleep_until(*at);
    fire(is_timeout, *at);
  }
  port_->sleep_until(t);
}

void Conversation::delay(double seconds) { wait_until(now() + std::max(0.0, seconds)); }

void Conversation::delay_until(double t) {
  if (t < now()) {
    std::cerr << "warning: " << cfg_.role << " delay_until(" << format_seconds(t) << ") is in the past\n";
    return;
  }
  wait_until(t);
}

void Conversation::record(const ObservedEvent& e, double clock, std::optional<MonitorVerdict> v) {
  if (!cfg_.log) return;
  LogEntry entry{e.time, cfg_.conversation, cfg_.role, e, clock, std::move(v), std::nullopt};
  cfg_.log->add(std::move(entry));
}

void Conversation::reject(const ObservedEvent& e, const MonitorVerdict& v) {
  record(e, monitor_ ? monitor_->clock_at(e.time) : 0, v);
  throw VerdictError(v);
}

// Passes a network-visible event to the observer and logs it.
void Conversation::watch(ObservedEvent e) {
  LogEntry entry{e.time, cfg_.conversation, cfg_.role, e, 0, std::nullopt, std::nullopt};
  if (monitor_) {
    entry.clock = monitor_->clock_at(e.time);
    auto [next, v] = observe(*monitor_, e);
    if (!v.ok()) reject(e, v);
    monitor_ = std::move(next);
    entry.verdict = v;
  }
  if (shadow_) {
    if (!monitor_) entry.clock = shadow_->clock_at(e.time);
    auto [next, v] = observe(*shadow_, e);
    shadow_ = std::move(next);
    entry.shadow = v;
  }
  if (cfg_.log) cfg_.log->add(entry);
  if (cfg_.halt_on_shadow_violation && entry.shadow && !entry.shadow->ok()) throw VerdictError(*entry.shadow);
}

void Conversation::send(const std::string& to, const std::string& label, std::vector<std::string> sorts,
                        std::vector<std::string> values) {
  if (values.empty()) values.resize(sorts.size());
  if (values.size() != sorts.size()) throw std::invalid_argument("one value per sort");
  if (cfg_.overhead > 0) delay(cfg_.overhead);

  if (monitor_ && monitor_->mode == MonitorMode::PreventRecover && !monitor_->accepting()) {
    if (const auto* t = monitor_->automaton->find(monitor_->current, Direction::Send, to, label);
        t && t->guard.has_lower()) {
      double target = monitor_->last_reset + to_seconds(t->guard.lower.value);
      if (t->guard.lower.strict) target += port_->tick();
      if (now() < target) wait_until(target);
    }
  }

  ObservedEvent e{Direction::Send, to, label, sorts, now()};
  watch(e);
  port_->push({cfg_.conversation, cfg_.protocol, cfg_.role, to, label, std::move(sorts), std::move(values), e.time});
}

ConversationMessage Conversation::receive(const std::string& from, const std::optional<std::string>& label) {
  if (cfg_.overhead > 0) delay(cfg_.overhead);

  if (monitor_ && monitor_->mode == MonitorMode::PreventRecover) {
    double t = now();
    if (auto s = earliest(*monitor_, Direction::Receive, t); s && s->duration > 0)
      wait_until(t + s->duration + (s->strict ? port_->tick() : 0));
  }

  bool is_timeout;
  auto at = limit(&is_timeout);
  std::optional<ConversationMessage> msg = port_->pop(from, at);
  if (!msg) fire(is_timeout, *at);

  ObservedEvent e{Direction::Receive, from, msg->label, msg->sorts, now()};
  if (label && msg->label != *label) {
    MonitorVerdict v;
    v.kind = VerdictKind::OrderViolation;
    v.expected = "? " + from + ":" + *label;
    v.got = "? " + from + ":" + msg->label;
    reject(e, v);
  }
  watch(e);
  return std::move(*msg);
}

const EndpointOutcome& SessionRun::outcome(const std::string& role) const {
  for (const auto& o : outcomes)
    if (o.role == role) return o;
  throw std::out_of_range("no endpoint " + role);
}

}  // namespace tsv
