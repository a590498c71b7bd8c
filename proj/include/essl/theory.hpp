#pragma once

#include <functional>
#include <optional>

#include "essl/core.hpp"
#include "essl/groups.hpp"
#include "essl/image.hpp"

namespace essl::theory {

class AssumptionViolatedError : public std::runtime_error {
 public:
  explicit AssumptionViolatedError(const std::string& what) : std::runtime_error(what) {}
};

/// Finite group presented as an explicit composition table over element
/// indices; identity is index 0.
struct GroupTable {
  int order = 1;
  std::vector<std::vector<int>> compose_table;  // compose_table[g][h] = g*h
  std::vector<int> inverse_table;

  static GroupTable from(const TransformationGroup& grp);
  static GroupTable trivial();
  static GroupTable cyclic(int n);

  int compose(int g, int h) const { return compose_table[g][h]; }
  int inverse(int g) const { return inverse_table[g]; }
  int element_order(int g) const;
  /// Checks closure, associativity, identity and inverse exhaustively.
  void validate() const;
};

/// Enumerable verification domain: concrete points P closed under a given
/// group action, a dataset subset X, and an explicit encoder lookup mapping
/// points to abstract representation ids.
struct FiniteDomain {
  GroupTable group;
  int num_points = 0;
  std::vector<std::vector<int>> action;  // action[g][p] -> point
  std::vector<int> dataset;              // X as point indices
  std::vector<int> encoder;              // encoder[p] -> representation id

  /// The transformed closure X' = {T_g(x) | g in G, x in X}.
  std::vector<int> transformed_closure() const;
  void validate() const;
};

struct Witness {
  int g1, x1, g2, x2;  // two decompositions whose representations collide
};

struct PropositionReport {
  bool assumption_holds = false;
  std::optional<Witness> violating_witness;
  bool identity_ok = false;
  bool compositionality_ok = false;
  bool commuting_ok = false;
  bool nontrivial = false;

  bool all_true() const {
    return assumption_holds && identity_ok && compositionality_ok && commuting_ok &&
           nontrivial;
  }
  /// key: value lines for CI consumption.
  std::string serialize() const;
};

/// Scans all ((g,x), (g',x')) decompositions and reports the first
/// representation collision in canonical order (g-major, dataset order).
PropositionReport check_assumption(const FiniteDomain& dom);

/// The induced output-side action, tabulated over reachable representation
/// ids. Requires the assumption; throws AssumptionViolatedError otherwise.
struct InducedAction {
  std::vector<int> rep_ids;              // reachable representation ids, sorted
  std::vector<std::vector<int>> table;   // table[g][rep_index] -> rep_index
};
InducedAction construct_induced_action(const FiniteDomain& dom);

/// Full exhaustive verification: assumption, identity law, compositionality,
/// commuting with the input action, and non-triviality. Reports rather than
/// throws on mathematical failure.
PropositionReport verify_proposition(const FiniteDomain& dom);

/// True when the induced action restricted to every orbit is free with
/// orbit size |G| and each element's cycle length equals its order (the
/// regular action, orbit by orbit).
bool induced_orbits_are_regular(const FiniteDomain& dom, const InducedAction& act);

// ---------------------------------------------------------------------------
// Domain builders.
// ---------------------------------------------------------------------------

enum class EncoderModel { kInjective, kGroupInvariant, kConstant };

/// Free action on formal points (g, x) over `base_points` orbit
/// representatives, with a chosen encoder behaviour.
FiniteDomain make_free_domain(const GroupTable& group, int base_points,
                              EncoderModel encoder);

/// Like make_free_domain with an injective encoder, but the dataset also
/// contains the orbit mate T_{mate}(x0): the assumption must fail.
FiniteDomain make_orbit_mate_domain(const GroupTable& group, int base_points, int mate);

/// Bridges small real image tensors to a finite domain: points are the
/// bitwise-distinct transformed images, and encoder outputs within
/// `feature_tolerance` (L2) collapse to one representation id.
FiniteDomain domain_from_images(const std::vector<Image>& dataset,
                                const TransformationGroup& grp,
                                const std::function<std::vector<double>(const Image&)>& encoder,
                                double feature_tolerance = 1e-6);

}  // namespace essl::theory
