#pragma once

// Shared helpers for the test binaries: seeded random families and sets of
// exact test directions.

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "kcm/family.hpp"

namespace kcm::testutil {

inline UpdateFamily random_family_2d(std::mt19937_64& gen, int max_rules = 4, int max_size = 3, int span = 3) {
  std::uniform_int_distribution<int> nrules(1, max_rules), nsize(1, max_size), coord(-span, span);
  std::vector<UpdateFamily::Rule> rules;
  const int m = nrules(gen);
  for (int i = 0; i < m; ++i) {
    UpdateFamily::Rule r;
    const int k = nsize(gen);
    while (static_cast<int>(r.size()) < k) {
      Vec v{coord(gen), coord(gen)};
      if (!is_zero(v)) r.push_back(v);
    }
    rules.push_back(r);
  }
  return UpdateFamily(2, rules);
}

/// At least `count` distinct reduced directions: the arc endpoints of the
/// family's stable set, their neighbours by mediants, and a lattice sweep.
inline std::vector<Vec> test_directions(const UpdateFamily& f, std::size_t count = 10000) {
  std::set<Vec> dirs;
  std::vector<Vec> special = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (const auto& rule : f.rules())
    for (const Vec& x : rule) {
      const Vec r = reduced(x);
      for (Vec w : {r, -r, rot_ccw(r), rot_cw(r)}) special.push_back(w);
    }
  for (Vec s : special) {
    dirs.insert(reduced(s));
    // directions just on either side of s
    for (std::int64_t k : {1000, 97, 7}) {
      dirs.insert(reduced(k * s + rot_ccw(s)));
      dirs.insert(reduced(k * s + rot_cw(s)));
    }
  }
  for (std::int64_t r = 1; dirs.size() < count; ++r)
    for (std::int64_t a = -r; a <= r && dirs.size() < count; ++a)
      for (Vec v : {Vec{a, r}, Vec{a, -r}, Vec{r, a}, Vec{-r, a}}) dirs.insert(reduced(v));
  return {dirs.begin(), dirs.end()};
}

/// The eight symmetries of Z^2.
inline std::vector<Vec (*)(Vec)> square_symmetries() {
  return {
      [](Vec v) { return v; },
      [](Vec v) { return Vec{-v.y, v.x}; },
      [](Vec v) { return Vec{-v.x, -v.y}; },
      [](Vec v) { return Vec{v.y, -v.x}; },
      [](Vec v) { return Vec{v.x, -v.y}; },
      [](Vec v) { return Vec{-v.x, v.y}; },
      [](Vec v) { return Vec{v.y, v.x}; },
      [](Vec v) { return Vec{-v.y, -v.x}; },
  };
}

}  // namespace kcm::testutil
