#pragma once

// Operator-overloading recorder. Arithmetic on ActiveScalar values appends
// elementary operations to the currently open RecordingSession; closing the
// session yields an immutable Tape that can be replayed at any input.

#include <algorithm>
#include <cmath>
#include <deque>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adjopt/error.hpp"

namespace adjopt::ad {

using Slot = std::int32_t;
inline constexpr Slot kNoSlot = -1;

enum class OpCode : std::uint8_t {
  add,
  sub,
  mul,
  div,
  neg,
  add_const,
  mul_const,
  pow_const,
  sin,
  cos,
  exp,
  ln,
};

inline constexpr bool is_binary(OpCode op) noexcept {
  return op == OpCode::add || op == OpCode::sub || op == OpCode::mul || op == OpCode::div;
}

inline constexpr bool has_constant(OpCode op) noexcept {
  return op == OpCode::add_const || op == OpCode::mul_const || op == OpCode::pow_const;
}

inline const char* opcode_name(OpCode op) noexcept {
  switch (op) {
    case OpCode::add: return "add";
    case OpCode::sub: return "sub";
    case OpCode::mul: return "mul";
    case OpCode::div: return "div";
    case OpCode::neg: return "neg";
    case OpCode::add_const: return "add-const";
    case OpCode::mul_const: return "mul-const";
    case OpCode::pow_const: return "pow-const";
    case OpCode::sin: return "sin";
    case OpCode::cos: return "cos";
    case OpCode::exp: return "exp";
    case OpCode::ln: return "ln";
  }
  return "?";
}

struct OpRecord {
  OpCode op;
  Slot arg0 = kNoSlot;
  Slot arg1 = kNoSlot;
  Slot result = kNoSlot;
  double constant = 0.0;
};

namespace detail {

// Primal evaluation shared by recording and replay so both produce
// identical bits.
inline double evaluate(OpCode op, double a, double b, double c) {
  switch (op) {
    case OpCode::add: return a + b;
    case OpCode::sub: return a - b;
    case OpCode::mul: return a * b;
    case OpCode::div:
      if (b == 0.0) throw NumericalError("division by zero in recorded div");
      return a / b;
    case OpCode::neg: return -a;
    case OpCode::add_const: return a + c;
    case OpCode::mul_const: return c * a;
    case OpCode::pow_const:
      if (a == 0.0 && c < 0.0) throw NumericalError("zero base with negative exponent in pow-const");
      return std::pow(a, c);
    case OpCode::sin: return std::sin(a);
    case OpCode::cos: return std::cos(a);
    case OpCode::exp: return std::exp(a);
    case OpCode::ln:
      if (!(a > 0.0)) throw NumericalError("non-positive argument to ln");
      return std::log(a);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Local partial derivatives (d result / d arg0, d result / d arg1).
inline std::pair<double, double> partials(OpCode op, double a, double b, double r, double c) {
  switch (op) {
    case OpCode::add: return {1.0, 1.0};
    case OpCode::sub: return {1.0, -1.0};
    case OpCode::mul: return {b, a};
    case OpCode::div: {
      const double inv = 1.0 / b;
      return {inv, -a * inv * inv};
    }
    case OpCode::neg: return {-1.0, 0.0};
    case OpCode::add_const: return {1.0, 0.0};
    case OpCode::mul_const: return {c, 0.0};
    case OpCode::pow_const: return {c * std::pow(a, c - 1.0), 0.0};
    case OpCode::sin: return {std::cos(a), 0.0};
    case OpCode::cos: return {-std::sin(a), 0.0};
    case OpCode::exp: return {r, 0.0};
    case OpCode::ln: return {1.0 / a, 0.0};
  }
  return {0.0, 0.0};
}

struct LocalStep {
  double value;
  double d0;
  double d1;
};

inline LocalStep step_general(OpCode op, double a, double b, double c) {
  const double r = evaluate(op, a, b, c);
  const auto [d0, d1] = partials(op, a, b, r, c);
  return {r, d0, d1};
}

// evaluate() and partials() in one dispatch. Produces the same bits as
// calling the two separately; the arithmetic opcodes stay inline.
inline LocalStep step(OpCode op, double a, double b, double c) {
  switch (op) {
    case OpCode::add: return {a + b, 1.0, 1.0};
    case OpCode::sub: return {a - b, 1.0, -1.0};
    case OpCode::mul: return {a * b, b, a};
    case OpCode::neg: return {-a, -1.0, 0.0};
    case OpCode::add_const: return {a + c, 1.0, 0.0};
    case OpCode::mul_const: return {c * a, c, 0.0};
    default: return step_general(op, a, b, c);
  }
}

}  // namespace detail

/// A record rewritten for register sweeps. a, b and r are rows of a buffer
/// whose first n_independent rows hold the inputs and whose remaining rows
/// are the registers; unary records repeat a in b.
struct SweepStep {
  OpCode op;
  bool binary;
  std::int32_t out_row;  // dependent fed by r; -1 if none, -2 if several
  std::uint32_t a;
  std::uint32_t b;
  std::uint32_t r;
  double constant;
  std::uint32_t slot;  // tape slot defined by this step
};

/// Immutable recording of one function evaluation F: R^n -> R^m.
///
/// Slots 0..n-1 hold the independents; record k defines slot n+k. Besides
/// the records, the tape carries a register plan for forward sweeps: each
/// intermediate slot is mapped onto a reusable workspace row so that tangent
/// storage scales with the number of simultaneously live values rather than
/// with the tape length.
class Tape {
public:
  static constexpr std::size_t kRegisterPool = 32;
  static constexpr std::size_t kSweepStreams = 4;

  Tape() = default;

  int tag() const noexcept { return tag_; }
  std::size_t n_independent() const noexcept { return n_independent_; }
  std::size_t n_dependent() const noexcept { return dependents_.size(); }
  std::size_t n_slots() const noexcept { return n_independent_ + records_.size(); }
  std::span<const OpRecord> records() const noexcept { return records_; }
  std::span<const Slot> dependents() const noexcept { return dependents_; }

  /// Inputs and outputs observed while recording.
  std::span<const double> recorded_inputs() const noexcept { return recorded_x_; }
  std::span<const double> recorded_outputs() const noexcept { return recorded_y_; }

  // Forward-sweep register plan.
  std::span<const Slot> registers() const noexcept { return register_of_; }
  std::size_t n_registers() const noexcept { return n_registers_; }
  /// Dependent rows ordered by defining slot; see `dependent_begin`.
  std::span<const std::int32_t> dependent_rows_by_slot() const noexcept { return dep_rows_; }
  /// Offsets into dependent_rows_by_slot(), one entry per slot plus sentinel.
  std::span<const std::int32_t> dependent_offsets() const noexcept { return dep_offsets_; }
  /// The records in register-row form, one per record, in a topological
  /// order that interleaves independent parts of the tape.
  std::span<const SweepStep> sweep_steps() const noexcept { return steps_; }
  /// Register rows needed by sweep_steps(), beyond the independents.
  std::size_t n_sweep_registers() const noexcept { return n_sweep_registers_; }

  void dump(std::ostream& os) const {
    for (const auto& rec : records_) {
      os << rec.result << " := " << opcode_name(rec.op) << '(' << rec.arg0;
      if (rec.arg1 != kNoSlot) os << ", " << rec.arg1;
      os << ')';
      if (has_constant(rec.op)) os << " [" << rec.constant << ']';
      os << '\n';
    }
  }

private:
  friend class RecordingSession;

  Tape(int tag, std::size_t n_independent, std::vector<OpRecord> records,
       std::vector<Slot> dependents, std::vector<double> x, std::vector<double> y)
      : tag_(tag),
        n_independent_(n_independent),
        records_(std::move(records)),
        dependents_(std::move(dependents)),
        recorded_x_(std::move(x)),
        recorded_y_(std::move(y)) {
    plan_registers();
    index_dependents();
    build_sweep_steps();
  }

  struct RegisterPlan {
    std::vector<Slot> register_of;
    std::size_t n_registers = 0;
  };

  // Liveness-based register assignment for the records visited in `order`,
  // which must be a topological order. Registers are handed out first-in
  // first-out from a pool of at least kRegisterPool rows so consecutive
  // records rarely write a row a recent record just read. The result takes
  // its register before dying arguments are released, so a result row never
  // overlaps an argument row.
  RegisterPlan assign_registers(const std::vector<std::size_t>& order) const {
    const std::size_t n_in = n_independent_;
    const std::size_t n_rec = records_.size();
    std::vector<std::int64_t> last_use(n_in + n_rec, -1);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto& rec = records_[order[pos]];
      last_use[rec.arg0] = static_cast<std::int64_t>(pos);
      if (rec.arg1 != kNoSlot) last_use[rec.arg1] = static_cast<std::int64_t>(pos);
    }
    RegisterPlan plan;
    plan.register_of.assign(n_in + n_rec, kNoSlot);
    const auto pool = static_cast<Slot>(std::min<std::size_t>(kRegisterPool, n_rec));
    std::deque<Slot> free_list;
    for (Slot r = 0; r < pool; ++r) free_list.push_back(r);
    Slot next = pool;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto& rec = records_[order[pos]];
      Slot reg;
      if (free_list.empty()) {
        reg = next++;
      } else {
        reg = free_list.front();
        free_list.pop_front();
      }
      plan.register_of[rec.result] = reg;
      for (Slot a : {rec.arg0, rec.arg1}) {
        if (a == kNoSlot || static_cast<std::size_t>(a) < n_in) continue;
        if (last_use[a] == static_cast<std::int64_t>(pos)) {
          free_list.push_back(plan.register_of[a]);
          last_use[a] = -2;  // guard against double release when arg0 == arg1
        }
      }
      if (last_use[rec.result] == -1) free_list.push_back(reg);
    }
    plan.n_registers = static_cast<std::size_t>(next);
    return plan;
  }

  void plan_registers() {
    std::vector<std::size_t> order(records_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    auto plan = assign_registers(order);
    register_of_ = std::move(plan.register_of);
    n_registers_ = plan.n_registers;
  }

  void index_dependents() {
    const std::size_t slots = n_slots();
    dep_offsets_.assign(slots + 1, 0);
    for (Slot s : dependents_) ++dep_offsets_[s + 1];
    for (std::size_t s = 0; s < slots; ++s) dep_offsets_[s + 1] += dep_offsets_[s];
    dep_rows_.assign(dependents_.size(), 0);
    std::vector<std::int32_t> fill(dep_offsets_.begin(), dep_offsets_.end() - 1);
    for (std::size_t i = 0; i < dependents_.size(); ++i)
      dep_rows_[fill[dependents_[i]]++] = static_cast<std::int32_t>(i);
  }

  // Splits the records into up to kSweepStreams contiguous pieces that share
  // no intermediates and visits them round-robin, so neighbouring steps of
  // the sweep are independent of each other.
  std::vector<std::size_t> interleaved_order() const {
    const std::size_t n_in = n_independent_;
    const std::size_t n_rec = records_.size();
    // earliest[k]: smallest record index read by any record at or after k.
    std::vector<std::size_t> earliest(n_rec + 1, n_rec);
    for (std::size_t k = n_rec; k-- > 0;) {
      std::size_t e = earliest[k + 1];
      for (Slot a : {records_[k].arg0, records_[k].arg1})
        if (a != kNoSlot && static_cast<std::size_t>(a) >= n_in)
          e = std::min(e, static_cast<std::size_t>(a) - n_in);
      earliest[k] = e;
    }
    std::vector<std::size_t> bounds{0};
    for (std::size_t s = 1; s < kSweepStreams; ++s) {
      std::size_t cut = std::max(bounds.back() + 1, n_rec * s / kSweepStreams);
      while (cut < n_rec && earliest[cut] < cut) ++cut;
      if (cut >= n_rec) break;
      bounds.push_back(cut);
    }
    bounds.push_back(n_rec);
    std::vector<std::size_t> order;
    order.reserve(n_rec);
    std::vector<std::size_t> at(bounds.begin(), bounds.end() - 1);
    while (order.size() < n_rec)
      for (std::size_t s = 0; s + 1 < bounds.size(); ++s)
        if (at[s] < bounds[s + 1]) order.push_back(at[s]++);
    return order;
  }

  void build_sweep_steps() {
    const std::size_t n_in = n_independent_;
    const auto order = interleaved_order();
    const auto plan = assign_registers(order);
    n_sweep_registers_ = plan.n_registers;
    auto row = [&](Slot s) {
      return static_cast<std::uint32_t>(static_cast<std::size_t>(s) < n_in
                                            ? static_cast<std::size_t>(s)
                                            : n_in + static_cast<std::size_t>(plan.register_of[s]));
    };
    steps_.clear();
    steps_.reserve(order.size());
    for (std::size_t k : order) {
      const auto& rec = records_[k];
      const std::size_t slot = n_in + k;
      const auto n_out = dep_offsets_[slot + 1] - dep_offsets_[slot];
      const std::int32_t out = n_out == 0 ? -1 : n_out == 1 ? dep_rows_[dep_offsets_[slot]] : -2;
      const bool binary = rec.arg1 != kNoSlot;
      steps_.push_back({rec.op, binary, out, row(rec.arg0), binary ? row(rec.arg1) : row(rec.arg0),
                        row(rec.result), rec.constant, static_cast<std::uint32_t>(slot)});
    }
  }

  int tag_ = 0;
  std::size_t n_independent_ = 0;
  std::vector<OpRecord> records_;
  std::vector<Slot> dependents_;
  std::vector<double> recorded_x_;
  std::vector<double> recorded_y_;

  std::vector<Slot> register_of_;
  std::size_t n_registers_ = 0;
  std::vector<std::int32_t> dep_offsets_;
  std::vector<std::int32_t> dep_rows_;
  std::vector<SweepStep> steps_;
  std::size_t n_sweep_registers_ = 0;
};

class RecordingSession;

namespace detail {
inline RecordingSession*& active_session() noexcept {
  static RecordingSession* session = nullptr;
  return session;
}
inline std::uint32_t next_session_id() noexcept {
  static std::uint32_t id = 0;
  return ++id;
}
}  // namespace detail

/// Scalar whose arithmetic is recorded while a session is open. A scalar
/// without a slot is a passive constant and never reaches the tape.
class ActiveScalar {
public:
  ActiveScalar() = default;
  ActiveScalar(double value) noexcept : value_(value) {}  // NOLINT: implicit passive constant

  double value() const noexcept { return value_; }
  Slot slot() const noexcept { return slot_; }
  bool is_active() const noexcept { return slot_ != kNoSlot; }
  std::uint32_t session_id() const noexcept { return session_; }

  ActiveScalar& operator+=(const ActiveScalar& o);
  ActiveScalar& operator-=(const ActiveScalar& o);
  ActiveScalar& operator*=(const ActiveScalar& o);
  ActiveScalar& operator/=(const ActiveScalar& o);

private:
  friend class RecordingSession;
  ActiveScalar(double value, Slot slot, std::uint32_t session) noexcept
      : value_(value), slot_(slot), session_(session) {}

  double value_ = 0.0;
  Slot slot_ = kNoSlot;
  std::uint32_t session_ = 0;
};

/// The single open recording. Obtain one through begin_recording().
class RecordingSession {
public:
  explicit RecordingSession(int tag) : tag_(tag), id_(detail::next_session_id()) {
    if (detail::active_session() != nullptr) throw RecordingError("recording already active");
    detail::active_session() = this;
  }

  RecordingSession(const RecordingSession&) = delete;
  RecordingSession& operator=(const RecordingSession&) = delete;

  ~RecordingSession() {
    if (detail::active_session() == this) detail::active_session() = nullptr;
  }

  int tag() const noexcept { return tag_; }
  bool is_open() const noexcept { return open_; }
  std::size_t n_independent() const noexcept { return n_independent_; }
  std::size_t n_dependent() const noexcept { return dependents_.size(); }
  std::size_t n_records() const noexcept { return records_.size(); }

  ActiveScalar mark_independent(double value) {
    ensure_open();
    if (!records_.empty())
      throw RecordingError("independents must be marked before any recorded operation");
    x_.push_back(value);
    return ActiveScalar(value, static_cast<Slot>(n_independent_++), id_);
  }

  std::size_t mark_dependent(const ActiveScalar& a) {
    ensure_open();
    if (!a.is_active()) throw RecordingError("dependent is a passive constant");
    if (a.session_id() != id_) throw RecordingError("dependent belongs to another recording");
    dependents_.push_back(a.slot());
    y_.push_back(a.value());
    return dependents_.size() - 1;
  }

  Tape end() {
    ensure_open();
    if (n_independent_ == 0) throw RecordingError("tape has no independents");
    if (dependents_.empty()) throw RecordingError("tape has no dependents");
    open_ = false;
    if (detail::active_session() == this) detail::active_session() = nullptr;
    return Tape(tag_, n_independent_, std::move(records_), std::move(dependents_), std::move(x_),
                std::move(y_));
  }

  // Called by the overloaded operators.
  ActiveScalar push(OpCode op, const ActiveScalar& a, const ActiveScalar* b, double c) {
    check_owner(a);
    if (b) check_owner(*b);
    const double value = detail::evaluate(op, a.value(), b ? b->value() : 0.0, c);
    const auto result = static_cast<Slot>(n_independent_ + records_.size());
    records_.push_back(OpRecord{op, a.slot(), b ? b->slot() : kNoSlot, result, c});
    return ActiveScalar(value, result, id_);
  }

private:
  void ensure_open() const {
    if (!open_) throw RecordingError("recording session already closed");
  }
  void check_owner(const ActiveScalar& a) const {
    if (a.session_id() != id_) throw RecordingError("active scalar belongs to another recording");
  }

  int tag_;
  std::uint32_t id_;
  bool open_ = true;
  std::size_t n_independent_ = 0;
  std::vector<OpRecord> records_;
  std::vector<Slot> dependents_;
  std::vector<double> x_;
  std::vector<double> y_;
};

inline RecordingSession begin_recording(int tag) { return RecordingSession(tag); }

inline ActiveScalar mark_independent(RecordingSession& s, double value) {
  return s.mark_independent(value);
}

inline std::size_t mark_dependent(RecordingSession& s, const ActiveScalar& a) {
  return s.mark_dependent(a);
}

inline Tape end_recording(RecordingSession& s) { return s.end(); }

namespace detail {

inline RecordingSession& session_for(const ActiveScalar& a) {
  RecordingSession* s = active_session();
  if (s == nullptr || !s->is_open())
    throw RecordingError("active scalar used outside of a recording");
  (void)a;
  return *s;
}

inline ActiveScalar unary(OpCode op, const ActiveScalar& a, double c = 0.0) {
  return session_for(a).push(op, a, nullptr, c);
}

inline ActiveScalar binary(OpCode op, const ActiveScalar& a, const ActiveScalar& b) {
  return session_for(a).push(op, a, &b, 0.0);
}

}  // namespace detail

inline ActiveScalar operator-(const ActiveScalar& a) {
  if (!a.is_active()) return ActiveScalar(-a.value());
  return detail::unary(OpCode::neg, a);
}

inline ActiveScalar operator+(const ActiveScalar& a, const ActiveScalar& b) {
  if (a.is_active() && b.is_active()) return detail::binary(OpCode::add, a, b);
  if (a.is_active()) return detail::unary(OpCode::add_const, a, b.value());
  if (b.is_active()) return detail::unary(OpCode::add_const, b, a.value());
  return ActiveScalar(a.value() + b.value());
}

inline ActiveScalar operator-(const ActiveScalar& a, const ActiveScalar& b) {
  if (a.is_active() && b.is_active()) return detail::binary(OpCode::sub, a, b);
  if (a.is_active()) return detail::unary(OpCode::add_const, a, -b.value());
  // c - b is recorded as (-b) + c, which rounds identically.
  if (b.is_active()) return detail::unary(OpCode::add_const, -b, a.value());
  return ActiveScalar(a.value() - b.value());
}

inline ActiveScalar operator*(const ActiveScalar& a, const ActiveScalar& b) {
  if (a.is_active() && b.is_active()) return detail::binary(OpCode::mul, a, b);
  if (a.is_active()) return detail::unary(OpCode::mul_const, a, b.value());
  if (b.is_active()) return detail::unary(OpCode::mul_const, b, a.value());
  return ActiveScalar(a.value() * b.value());
}

inline ActiveScalar operator/(const ActiveScalar& a, const ActiveScalar& b) {
  if (b.is_active()) {
    if (a.is_active()) return detail::binary(OpCode::div, a, b);
    return detail::unary(OpCode::mul_const, detail::unary(OpCode::pow_const, b, -1.0), a.value());
  }
  if (b.value() == 0.0) throw NumericalError("division by passive zero");
  if (a.is_active()) return detail::unary(OpCode::mul_const, a, 1.0 / b.value());
  return ActiveScalar(a.value() / b.value());
}

inline ActiveScalar& ActiveScalar::operator+=(const ActiveScalar& o) { return *this = *this + o; }
inline ActiveScalar& ActiveScalar::operator-=(const ActiveScalar& o) { return *this = *this - o; }
inline ActiveScalar& ActiveScalar::operator*=(const ActiveScalar& o) { return *this = *this * o; }
inline ActiveScalar& ActiveScalar::operator/=(const ActiveScalar& o) { return *this = *this / o; }

inline ActiveScalar pow(const ActiveScalar& a, double c) {
  if (!a.is_active()) return ActiveScalar(std::pow(a.value(), c));
  return detail::unary(OpCode::pow_const, a, c);
}

inline ActiveScalar sqrt(const ActiveScalar& a) { return pow(a, 0.5); }

inline ActiveScalar sin(const ActiveScalar& a) {
  if (!a.is_active()) return ActiveScalar(std::sin(a.value()));
  return detail::unary(OpCode::sin, a);
}

inline ActiveScalar cos(const ActiveScalar& a) {
  if (!a.is_active()) return ActiveScalar(std::cos(a.value()));
  return detail::unary(OpCode::cos, a);
}

inline ActiveScalar exp(const ActiveScalar& a) {
  if (!a.is_active()) return ActiveScalar(std::exp(a.value()));
  return detail::unary(OpCode::exp, a);
}

inline ActiveScalar log(const ActiveScalar& a) {
  if (!a.is_active()) return ActiveScalar(std::log(a.value()));
  return detail::unary(OpCode::ln, a);
}

/// Value of a scalar regardless of whether it is recorded.
inline double value_of(double x) noexcept { return x; }
inline double value_of(const ActiveScalar& x) noexcept { return x.value(); }

}  // namespace adjopt::ad
