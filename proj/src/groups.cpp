#include "essl/groups.hpp"

#include <algorithm>
#include <cmath>

namespace essl {

std::string to_string(GroupName g) {
  switch (g) {
    case GroupName::kFourFoldRotations: return "four_fold_rotations";
    case GroupName::kHorizontalFlips: return "horizontal_flips";
    case GroupName::kVerticalFlips: return "vertical_flips";
    case GroupName::kJigsaw2x2: return "jigsaw_2x2";
    case GroupName::kFourFoldTranslations: return "four_fold_translations";
    case GroupName::kColorInversions: return "color_inversions";
    case GroupName::kGaussianBlurLevels: return "gaussian_blur_levels";
    case GroupName::kScaling: return "scaling";
  }
  return "?";
}

std::optional<GroupName> group_from_string(const std::string& s) {
  for (auto g : {GroupName::kFourFoldRotations, GroupName::kHorizontalFlips,
                 GroupName::kVerticalFlips, GroupName::kJigsaw2x2,
                 GroupName::kFourFoldTranslations, GroupName::kColorInversions,
                 GroupName::kGaussianBlurLevels, GroupName::kScaling})
    if (to_string(g) == s) return g;
  return std::nullopt;
}

TransformationGroup group(GroupName name) {
  switch (name) {
    case GroupName::kFourFoldRotations: return {name, 4, true};
    case GroupName::kHorizontalFlips: return {name, 2, true};
    case GroupName::kVerticalFlips: return {name, 2, true};
    case GroupName::kJigsaw2x2: return {name, 24, true};
    case GroupName::kFourFoldTranslations: return {name, 4, true};
    case GroupName::kColorInversions: return {name, 2, true};
    case GroupName::kGaussianBlurLevels: return {name, 4, false};
    case GroupName::kScaling: return {name, kInfiniteOrder, true};
  }
  throw std::invalid_argument("group: unknown group name");
}

bool GroupElement::is_identity() const {
  return group == GroupName::kScaling ? scale == 1.0 : index == 0;
}

GroupElement TransformationGroup::identity() const {
  return name == GroupName::kScaling ? scaling_element(1.0) : element(0);
}

GroupElement TransformationGroup::element(int index) const {
  if (name == GroupName::kScaling)
    throw std::invalid_argument("element: scaling group is indexed by a scale");
  if (index < 0 || index >= order)
    throw std::invalid_argument("element: index out of range for " + to_string(name));
  GroupElement g;
  g.group = name;
  g.index = index;
  return g;
}

GroupElement TransformationGroup::scaling_element(double scale) const {
  if (name != GroupName::kScaling)
    throw std::invalid_argument("scaling_element: not the scaling group");
  if (!(scale > 0.0))
    throw std::invalid_argument("scaling_element: scale must be positive");
  GroupElement g;
  g.group = name;
  g.scale = scale;
  return g;
}

namespace {

const std::array<std::array<int, 4>, 24>& jigsaw_table() {
  static const auto table = [] {
    std::array<std::array<int, 4>, 24> t{};
    std::array<int, 4> p = {0, 1, 2, 3};
    int i = 0;
    do {
      t[i++] = p;
    } while (std::next_permutation(p.begin(), p.end()));
    return t;
  }();
  return table;
}

void check_even_dims(const Image& x, const char* who) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    throw std::invalid_argument(std::string(who) +
                                ": tile-based transforms need even H and W");
}

}  // namespace

const std::array<int, 4>& jigsaw_permutation(int index) {
  if (index < 0 || index >= 24)
    throw std::invalid_argument("jigsaw_permutation: index out of range");
  return jigsaw_table()[index];
}

int jigsaw_index_of(const std::array<int, 4>& perm) {
  const auto& t = jigsaw_table();
  for (int i = 0; i < 24; ++i)
    if (t[i] == perm) return i;
  throw std::invalid_argument("jigsaw_index_of: not a permutation of {0,1,2,3}");
}

Image apply(const GroupElement& g, const Image& x) {
  x.require_shape("apply");
  switch (g.group) {
    case GroupName::kFourFoldRotations:
      return rot90_ccw(x, g.index);
    case GroupName::kHorizontalFlips:
      return g.index == 0 ? x : flip_horizontal(x);
    case GroupName::kVerticalFlips:
      return g.index == 0 ? x : flip_vertical(x);
    case GroupName::kJigsaw2x2: {
      check_even_dims(x, "apply(jigsaw_2x2)");
      if (g.index == 0) return x;
      return permute_tiles_2x2(x, jigsaw_permutation(g.index).data());
    }
    case GroupName::kFourFoldTranslations: {
      check_even_dims(x, "apply(four_fold_translations)");
      if (g.index == 0) return x;
      int dy = (g.index & 2) ? x.h / 2 : 0;
      int dx = (g.index & 1) ? x.w / 2 : 0;
      return roll(x, dy, dx);
    }
    case GroupName::kColorInversions:
      return g.index == 0 ? x : invert_colors(x);
    case GroupName::kGaussianBlurLevels: {
      int k = kBlurKernelSizes.at(g.index);
      if (k == 0) return x;  // level 0 is the identity map
      return gaussian_blur(x, k, default_blur_sigma(k));
    }
    case GroupName::kScaling: {
      if (!(g.scale > 0.0))
        throw std::invalid_argument("apply(scaling): scale must be positive");
      if (g.scale == 1.0) return x;
      return scale_pixels(x, static_cast<float>(g.scale));
    }
  }
  throw std::invalid_argument("apply: unknown group");
}

GroupElement compose(const GroupElement& g, const GroupElement& h) {
  if (g.group != h.group)
    throw std::invalid_argument("compose: elements from different groups");
  auto grp = group(g.group);
  if (!grp.is_group)
    throw NotAGroupError("compose: " + to_string(g.group) +
                         " is not closed under composition");
  switch (g.group) {
    case GroupName::kFourFoldRotations:
      return grp.element((g.index + h.index) % 4);
    case GroupName::kHorizontalFlips:
    case GroupName::kVerticalFlips:
    case GroupName::kColorInversions:
      return grp.element(g.index ^ h.index);
    case GroupName::kFourFoldTranslations:
      return grp.element(g.index ^ h.index);
    case GroupName::kJigsaw2x2: {
      // apply(g, apply(h, x)) reads destination d from h's perm of g's perm.
      const auto& pg = jigsaw_permutation(g.index);
      const auto& ph = jigsaw_permutation(h.index);
      std::array<int, 4> out{};
      for (int d = 0; d < 4; ++d) out[d] = ph[pg[d]];
      return grp.element(jigsaw_index_of(out));
    }
    case GroupName::kScaling:
      return grp.scaling_element(g.scale * h.scale);
    default:
      throw std::invalid_argument("compose: unknown group");
  }
}

GroupElement inverse(const GroupElement& g) {
  auto grp = group(g.group);
  if (!grp.is_group)
    throw NotAGroupError("inverse: " + to_string(g.group) +
                         " has no inverses in the set");
  switch (g.group) {
    case GroupName::kFourFoldRotations:
      return grp.element((4 - g.index) % 4);
    case GroupName::kHorizontalFlips:
    case GroupName::kVerticalFlips:
    case GroupName::kColorInversions:
    case GroupName::kFourFoldTranslations:
      return grp.element(g.index);  // involutions / Klein four-group
    case GroupName::kJigsaw2x2: {
      const auto& p = jigsaw_permutation(g.index);
      std::array<int, 4> inv{};
      for (int d = 0; d < 4; ++d) inv[p[d]] = d;
      return grp.element(jigsaw_index_of(inv));
    }
    case GroupName::kScaling:
      return grp.scaling_element(1.0 / g.scale);
    default:
      throw std::invalid_argument("inverse: unknown group");
  }
}

GroupElement sample(const TransformationGroup& grp, RngStream& rng, double s_max) {
  if (grp.name == GroupName::kScaling) {
    if (!(s_max > 1.0))
      throw std::invalid_argument("sample(scaling): s_max must exceed 1");
    // s uniform in (1, s_max], then down-scaling with equal probability.
    double u = rng.uniform();
    double s = s_max - u * (s_max - 1.0);
    if (rng.bernoulli(0.5)) s = 1.0 / s;
    return grp.scaling_element(s);
  }
  GroupElement g;
  g.group = grp.name;
  g.index = rng.uniform_int(grp.order);
  return g;
}

int gpm_rotation_class(const GroupElement& g) {
  if (g.group != GroupName::kFourFoldRotations)
    throw std::invalid_argument("gpm_rotation_class: needs a four-fold rotation");
  return (g.index == 1 || g.index == 3) ? 1 : 0;
}

}  // namespace essl
