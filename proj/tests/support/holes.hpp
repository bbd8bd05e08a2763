#pragma once

// Brute-force hole candidate enumeration and random hole trees.

#include <random>
#include <set>

#include "templar/templar.hpp"

namespace templar::testing {

// Brute-force candidate list of a hole. Independent of fill().
inline std::vector<ExpPtr> candidates(const Exp& h, const std::vector<std::string>& ids) {
  std::vector<ExpPtr> out;
  auto product = [&](BinOp op, const ExpPtr& l, const ExpPtr& r) {
    for (const auto& x : candidates(*l, ids))
      for (const auto& y : candidates(*r, ids)) out.push_back(bin(op, x, y));
  };
  switch (h.node.index()) {
  case 0: out.push_back(num(std::get<Num>(h.node).value)); break;
  case 1: out.push_back(var(std::get<Var>(h.node).name)); break;
  case 2: product(std::get<Binary>(h.node).op, std::get<Binary>(h.node).lhs, std::get<Binary>(h.node).rhs); break;
  case 3: {
    const auto& v = std::get<IntValHole>(h.node);
    for (std::int64_t x = v.min;; ++x) {
      out.push_back(num(x));
      if (x == v.max) break;
    }
    break;
  }
  case 4: {
    const auto& id = std::get<IntIdHole>(h.node);
    for (const auto& n : id.names.empty() ? ids : id.names) out.push_back(var(n));
    break;
  }
  case 5: {
    const auto& o = std::get<OpHole>(h.node);
    for (BinOp op : o.ops.members()) product(op, o.lhs, o.rhs);
    break;
  }
  default:
    for (const auto& c : std::get<AltHole>(h.node).cands) {
      auto more = candidates(*c, ids);
      out.insert(out.end(), more.begin(), more.end());
    }
  }
  return out;
}

inline std::set<std::string> enumerate(const Exp& h, const std::vector<std::string>& ids) {
  std::set<std::string> out;
  for (const auto& c : candidates(h, ids)) out.insert(print(*c));
  return out;
}

// Random hole trees with small candidate sets.
class RandomHole {
public:
  explicit RandomHole(std::uint64_t seed) : rng_(seed) {}

  ExpPtr int_valued(int depth) {
    switch (pick(depth > 0 ? 4 : 2)) {
    case 0: {
      const std::int64_t lo = static_cast<std::int64_t>(pick(7)) - 3;
      return int_val(lo, lo + static_cast<std::int64_t>(pick(4)));
    }
    case 1: return pick(2) == 0 ? int_id() : int_id({"b"});
    case 2: return arithmetic(int_valued(depth - 1), int_valued(depth - 1), pick(2) ? OpSet{} : OpSet{BinOp::Sub});
    default: return alt({int_valued(depth - 1), pick(2) ? var("a") : int_valued(depth - 1)});
    }
  }

  ExpPtr bool_valued(int depth) {
    if (depth <= 0 || pick(2) == 0) return relation(int_valued(depth - 1), int_valued(depth - 1));
    return logic(bool_valued(depth - 1), bool_valued(depth - 1));
  }

  ExpPtr root() { return eval(pick(2) ? int_valued(2) : bool_valued(2)); }

private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::mt19937_64 rng_;
};

} // namespace templar::testing
