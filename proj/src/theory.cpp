#include "essl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace essl::theory {

GroupTable GroupTable::from(const TransformationGroup& grp) {
  if (grp.order == kInfiniteOrder)
    throw std::invalid_argument("GroupTable: infinite groups are not enumerable");
  if (!grp.is_group)
    throw NotAGroupError("GroupTable: " + to_string(grp.name) + " is not a group");
  GroupTable t;
  t.order = grp.order;
  t.compose_table.assign(grp.order, std::vector<int>(grp.order));
  t.inverse_table.resize(grp.order);
  for (int g = 0; g < grp.order; ++g) {
    for (int h = 0; h < grp.order; ++h)
      t.compose_table[g][h] = essl::compose(grp.element(g), grp.element(h)).index;
    t.inverse_table[g] = essl::inverse(grp.element(g)).index;
  }
  t.validate();
  return t;
}

GroupTable GroupTable::trivial() {
  GroupTable t;
  t.order = 1;
  t.compose_table = {{0}};
  t.inverse_table = {0};
  return t;
}

GroupTable GroupTable::cyclic(int n) {
  GroupTable t;
  t.order = n;
  t.compose_table.assign(n, std::vector<int>(n));
  t.inverse_table.resize(n);
  for (int g = 0; g < n; ++g) {
    for (int h = 0; h < n; ++h) t.compose_table[g][h] = (g + h) % n;
    t.inverse_table[g] = (n - g) % n;
  }
  return t;
}

int GroupTable::element_order(int g) const {
  int cur = g, ord = 1;
  while (cur != 0) {
    cur = compose(g, cur);
    ++ord;
    if (ord > order) throw std::logic_error("element_order: not a group");
  }
  return ord;
}

void GroupTable::validate() const {
  for (int g = 0; g < order; ++g)
    for (int h = 0; h < order; ++h) {
      int gh = compose_table[g][h];
      if (gh < 0 || gh >= order) throw std::logic_error("GroupTable: not closed");
    }
  for (int g = 0; g < order; ++g)
    if (compose_table[0][g] != g || compose_table[g][0] != g)
      throw std::logic_error("GroupTable: identity law fails");
  for (int g = 0; g < order; ++g)
    for (int h = 0; h < order; ++h)
      for (int k = 0; k < order; ++k)
        if (compose_table[compose_table[g][h]][k] != compose_table[g][compose_table[h][k]])
          throw std::logic_error("GroupTable: associativity fails");
  for (int g = 0; g < order; ++g)
    if (compose_table[g][inverse_table[g]] != 0 || compose_table[inverse_table[g]][g] != 0)
      throw std::logic_error("GroupTable: inverse law fails");
}

std::vector<int> FiniteDomain::transformed_closure() const {
  std::set<int> seen;
  for (int x : dataset)
    for (int g = 0; g < group.order; ++g) seen.insert(action[g][x]);
  return {seen.begin(), seen.end()};
}

void FiniteDomain::validate() const {
  group.validate();
  if (static_cast<int>(action.size()) != group.order)
    throw std::invalid_argument("FiniteDomain: action table must cover the group");
  for (const auto& row : action)
    if (static_cast<int>(row.size()) != num_points)
      throw std::invalid_argument("FiniteDomain: action table must cover all points");
  for (int p = 0; p < num_points; ++p)
    if (action[0][p] != p)
      throw std::invalid_argument("FiniteDomain: identity must act trivially");
  for (int g = 0; g < group.order; ++g)
    for (int h = 0; h < group.order; ++h)
      for (int p = 0; p < num_points; ++p)
        if (action[g][action[h][p]] != action[group.compose(g, h)][p])
          throw std::invalid_argument("FiniteDomain: the given maps are not an action");
  if (static_cast<int>(encoder.size()) != num_points)
    throw std::invalid_argument("FiniteDomain: encoder table must be total");
  for (int x : dataset)
    if (x < 0 || x >= num_points)
      throw std::invalid_argument("FiniteDomain: dataset point out of range");
}

std::string PropositionReport::serialize() const {
  std::ostringstream os;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "assumption_holds: " << b(assumption_holds) << "\n";
  if (violating_witness) {
    const auto& w = *violating_witness;
    os << "violating_witness: (g=" << w.g1 << ",x=" << w.x1 << ") vs (g=" << w.g2
       << ",x=" << w.x2 << ")\n";
  }
  os << "identity_ok: " << b(identity_ok) << "\n"
     << "compositionality_ok: " << b(compositionality_ok) << "\n"
     << "commuting_ok: " << b(commuting_ok) << "\n"
     << "nontrivial: " << b(nontrivial) << "\n"
     << "all_true: " << b(all_true()) << "\n";
  return os.str();
}

PropositionReport check_assumption(const FiniteDomain& dom) {
  dom.validate();
  PropositionReport report;
  std::map<int, std::pair<int, int>> first_seen;  // representation id -> (g, x)
  for (int g = 0; g < dom.group.order; ++g)
    for (int x : dom.dataset) {
      int rep = dom.encoder[dom.action[g][x]];
      auto it = first_seen.find(rep);
      if (it == first_seen.end()) {
        first_seen[rep] = {g, x};
        continue;
      }
      auto [g0, x0] = it->second;
      if (g0 == g && x0 == x) continue;
      report.assumption_holds = false;
      report.violating_witness = Witness{g0, x0, g, x};
      return report;
    }
  report.assumption_holds = true;
  return report;
}

InducedAction construct_induced_action(const FiniteDomain& dom) {
  auto pre = check_assumption(dom);
  if (!pre.assumption_holds) {
    const auto& w = *pre.violating_witness;
    throw AssumptionViolatedError(
        "construct_induced_action: representations collide for (g=" +
        std::to_string(w.g1) + ",x=" + std::to_string(w.x1) + ") and (g=" +
        std::to_string(w.g2) + ",x=" + std::to_string(w.x2) + ")");
  }
  // Each reachable representation id has a unique decomposition (g', x').
  std::map<int, std::pair<int, int>> decomp;
  for (int g = 0; g < dom.group.order; ++g)
    for (int x : dom.dataset) decomp[dom.encoder[dom.action[g][x]]] = {g, x};

  InducedAction out;
  out.rep_ids.reserve(decomp.size());
  for (auto& [rep, gx] : decomp) out.rep_ids.push_back(rep);
  std::map<int, int> rep_index;
  for (size_t i = 0; i < out.rep_ids.size(); ++i) rep_index[out.rep_ids[i]] = static_cast<int>(i);

  out.table.assign(dom.group.order, std::vector<int>(out.rep_ids.size()));
  for (int g = 0; g < dom.group.order; ++g)
    for (size_t si = 0; si < out.rep_ids.size(); ++si) {
      auto [gp, xp] = decomp[out.rep_ids[si]];
      int target = dom.encoder[dom.action[dom.group.compose(g, gp)][xp]];
      auto it = rep_index.find(target);
      if (it == rep_index.end())
        throw std::logic_error("construct_induced_action: image left the reachable set");
      out.table[g][si] = it->second;
    }
  return out;
}

PropositionReport verify_proposition(const FiniteDomain& dom) {
  PropositionReport report = check_assumption(dom);
  if (!report.assumption_holds) return report;

  auto act = construct_induced_action(dom);
  const int ns = static_cast<int>(act.rep_ids.size());

  report.identity_ok = true;
  for (int s = 0; s < ns; ++s)
    if (act.table[0][s] != s) report.identity_ok = false;

  report.compositionality_ok = true;
  for (int g = 0; g < dom.group.order; ++g)
    for (int h = 0; h < dom.group.order; ++h)
      for (int s = 0; s < ns; ++s)
        if (act.table[g][act.table[h][s]] != act.table[dom.group.compose(g, h)][s])
          report.compositionality_ok = false;

  std::map<int, int> rep_index;
  for (int i = 0; i < ns; ++i) rep_index[act.rep_ids[i]] = i;
  report.commuting_ok = true;
  for (int p : dom.transformed_closure())
    for (int g = 0; g < dom.group.order; ++g) {
      auto lhs = rep_index.find(dom.encoder[dom.action[g][p]]);
      auto rhs = rep_index.find(dom.encoder[p]);
      if (lhs == rep_index.end() || rhs == rep_index.end() ||
          lhs->second != act.table[g][rhs->second])
        report.commuting_ok = false;
    }

  // Non-trivial: some element moves some representation. The trivial group
  // cannot qualify by definition.
  report.nontrivial = false;
  if (dom.group.order > 1)
    for (int g = 1; g < dom.group.order && !report.nontrivial; ++g)
      for (int s = 0; s < ns; ++s)
        if (act.table[g][s] != s) {
          report.nontrivial = true;
          break;
        }
  return report;
}

bool induced_orbits_are_regular(const FiniteDomain& dom, const InducedAction& act) {
  const int ns = static_cast<int>(act.rep_ids.size());
  std::vector<int> orbit_id(ns, -1);
  int orbits = 0;
  for (int s = 0; s < ns; ++s) {
    if (orbit_id[s] != -1) continue;
    std::vector<int> stack = {s};
    orbit_id[s] = orbits;
    size_t size = 0;
    while (!stack.empty()) {
      int cur = stack.back();
      stack.pop_back();
      ++size;
      for (int g = 0; g < dom.group.order; ++g) {
        int nxt = act.table[g][cur];
        if (orbit_id[nxt] == -1) {
          orbit_id[nxt] = orbits;
          stack.push_back(nxt);
        }
      }
    }
    if (static_cast<int>(size) != dom.group.order) return false;
    ++orbits;
  }
  // Cycle length of every g on every orbit equals the element's order.
  for (int g = 0; g < dom.group.order; ++g) {
    int expected = dom.group.element_order(g);
    for (int s = 0; s < ns; ++s) {
      int cur = act.table[g][s], len = 1;
      while (cur != s) {
        cur = act.table[g][cur];
        ++len;
        if (len > dom.group.order) return false;
      }
      if (len != expected) return false;
    }
  }
  return true;
}

FiniteDomain make_free_domain(const GroupTable& group, int base_points,
                              EncoderModel encoder) {
  if (base_points <= 0) throw std::invalid_argument("make_free_domain: need base points");
  FiniteDomain dom;
  dom.group = group;
  dom.num_points = group.order * base_points;
  auto point = [&](int g, int x) { return g * base_points + x; };
  dom.action.assign(group.order, std::vector<int>(dom.num_points));
  for (int h = 0; h < group.order; ++h)
    for (int g = 0; g < group.order; ++g)
      for (int x = 0; x < base_points; ++x)
        dom.action[h][point(g, x)] = point(group.compose(h, g), x);
  for (int x = 0; x < base_points; ++x) dom.dataset.push_back(point(0, x));
  dom.encoder.resize(dom.num_points);
  for (int g = 0; g < group.order; ++g)
    for (int x = 0; x < base_points; ++x) {
      switch (encoder) {
        case EncoderModel::kInjective: dom.encoder[point(g, x)] = point(g, x); break;
        case EncoderModel::kGroupInvariant: dom.encoder[point(g, x)] = x; break;
        case EncoderModel::kConstant: dom.encoder[point(g, x)] = 0; break;
      }
    }
  return dom;
}

FiniteDomain make_orbit_mate_domain(const GroupTable& group, int base_points, int mate) {
  if (mate <= 0 || mate >= group.order)
    throw std::invalid_argument("make_orbit_mate_domain: mate must be a non-identity element");
  FiniteDomain dom = make_free_domain(group, base_points, EncoderModel::kInjective);
  // The dataset also contains T_mate(x0): two elements of one orbit.
  dom.dataset.push_back(mate * base_points);
  return dom;
}

FiniteDomain domain_from_images(
    const std::vector<Image>& dataset, const TransformationGroup& grp,
    const std::function<std::vector<double>(const Image&)>& encoder,
    double feature_tolerance) {
  if (dataset.empty()) throw std::invalid_argument("domain_from_images: empty dataset");
  FiniteDomain dom;
  dom.group = GroupTable::from(grp);

  std::vector<Image> points;
  auto find_point = [&](const Image& img) -> int {
    for (size_t i = 0; i < points.size(); ++i)
      if (bitwise_equal(points[i], img)) return static_cast<int>(i);
    return -1;
  };
  auto intern = [&](const Image& img) -> int {
    int idx = find_point(img);
    if (idx >= 0) return idx;
    points.push_back(img);
    return static_cast<int>(points.size()) - 1;
  };
  for (const auto& x : dataset) dom.dataset.push_back(intern(x));
  for (const auto& x : dataset)
    for (int g = 0; g < dom.group.order; ++g) intern(apply(grp.element(g), x));
  dom.num_points = static_cast<int>(points.size());

  dom.action.assign(dom.group.order, std::vector<int>(dom.num_points));
  for (int g = 0; g < dom.group.order; ++g)
    for (int p = 0; p < dom.num_points; ++p) {
      int target = find_point(apply(grp.element(g), points[p]));
      if (target < 0)
        throw std::logic_error("domain_from_images: action left the closure");
      dom.action[g][p] = target;
    }

  // Cluster encoder outputs within the feature tolerance.
  std::vector<std::vector<double>> reps;
  dom.encoder.resize(dom.num_points);
  for (int p = 0; p < dom.num_points; ++p) {
    auto feat = encoder(points[p]);
    int id = -1;
    for (size_t r = 0; r < reps.size(); ++r) {
      if (reps[r].size() != feat.size()) continue;
      double dist2 = 0.0;
      for (size_t i = 0; i < feat.size(); ++i) {
        double d = reps[r][i] - feat[i];
        dist2 += d * d;
      }
      if (std::sqrt(dist2) <= feature_tolerance) {
        id = static_cast<int>(r);
        break;
      }
    }
    if (id < 0) {
      reps.push_back(std::move(feat));
      id = static_cast<int>(reps.size()) - 1;
    }
    dom.encoder[p] = id;
  }
  return dom;
}

}  // namespace essl::theory
