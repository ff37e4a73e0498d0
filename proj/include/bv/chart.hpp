#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bv {

enum class Parity : unsigned char { Even = 0, Odd = 1 };

inline Parity parity_of_ghost(int ghost) {
  return (ghost % 2 == 0) ? Parity::Even : Parity::Odd;
}

struct GradingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using VarIndex = std::uint32_t;

/// A graded variable. Parity is not stored: it is ghost mod 2 by construction.
struct GradedVariable {
  std::string name;
  int ghost = 0;
  Parity parity() const { return parity_of_ghost(ghost); }
  bool odd() const { return parity() == Parity::Odd; }
  friend bool operator==(const GradedVariable& a, const GradedVariable& b) {
    return a.name == b.name && a.ghost == b.ghost;
  }
};

/// Ordered universe of graded variables. The declaration order is the global
/// monomial order used for normalization.
class Chart {
 public:
  Chart() = default;
  virtual ~Chart() = default;

  VarIndex add(std::string name, int ghost) {
    for (const auto& v : vars_)
      if (v.name == name) throw ChartError("duplicate variable name: " + name);
    vars_.push_back({std::move(name), ghost});
    return static_cast<VarIndex>(vars_.size() - 1);
  }

  std::size_t size() const { return vars_.size(); }
  const GradedVariable& var(VarIndex i) const { return vars_.at(i); }
  const std::vector<GradedVariable>& vars() const { return vars_; }

  std::optional<VarIndex> find(const std::string& name) const {
    for (VarIndex i = 0; i < vars_.size(); ++i)
      if (vars_[i].name == name) return i;
    return std::nullopt;
  }
  VarIndex index_of(const std::string& name) const {
    auto i = find(name);
    if (!i) throw ChartError("unknown variable: " + name);
    return *i;
  }

  friend bool operator==(const Chart& a, const Chart& b) { return a.vars_ == b.vars_; }
  friend bool operator!=(const Chart& a, const Chart& b) { return !(a == b); }

 private:
  std::vector<GradedVariable> vars_;
};

using ChartPtr = std::shared_ptr<const Chart>;

/// A chart organized in conjugate Darboux pairs (Phi^I, Phi+_I) with
/// gh(Phi+) = -1 - gh(Phi). The antifield immediately follows its field in the
/// global order, so pair scans are linear.
class DarbouxChart : public Chart {
 public:
  struct Pair {
    VarIndex field;
    VarIndex antifield;
  };

  /// Adds a conjugate pair; the antifield ghost number is implied.
  std::size_t add_pair(const std::string& field_name, int field_ghost,
                       const std::string& antifield_name) {
    VarIndex f = add(field_name, field_ghost);
    VarIndex a = add(antifield_name, -1 - field_ghost);
    pairs_.push_back({f, a});
    return pairs_.size() - 1;
  }

  /// Validating form for deserialized charts with explicit ghosts.
  std::size_t add_pair_checked(const std::string& field_name, int field_ghost,
                               const std::string& antifield_name, int antifield_ghost) {
    if (antifield_ghost != -1 - field_ghost)
      throw GradingError("pair (" + field_name + ", " + antifield_name +
                         "): gh(antifield) must be -1-gh(field)");
    return add_pair(field_name, field_ghost, antifield_name);
  }

  const std::vector<Pair>& pairs() const { return pairs_; }

  /// Conjugate of a variable within its pair, if it belongs to one.
  std::optional<VarIndex> conjugate(VarIndex v) const {
    for (const auto& p : pairs_) {
      if (p.field == v) return p.antifield;
      if (p.antifield == v) return p.field;
    }
    return std::nullopt;
  }
  bool is_field(VarIndex v) const {
    for (const auto& p : pairs_)
      if (p.field == v) return true;
    return false;
  }

 private:
  std::vector<Pair> pairs_;
};

using DarbouxChartPtr = std::shared_ptr<const DarbouxChart>;

inline bool same_universe(const Chart& a, const Chart& b) { return a == b; }

}  // namespace bv
