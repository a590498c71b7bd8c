#pragma once

#include <array>
#include <optional>
#include <string>

#include "essl/core.hpp"
#include "essl/image.hpp"

namespace essl {

enum class GroupName {
  kFourFoldRotations,
  kHorizontalFlips,
  kVerticalFlips,
  kJigsaw2x2,
  kFourFoldTranslations,
  kColorInversions,
  kGaussianBlurLevels,  // transformation set, not a group
  kScaling,             // continuous multiplicative group on pixel values
};

constexpr int kInfiniteOrder = -1;

std::string to_string(GroupName g);
std::optional<GroupName> group_from_string(const std::string& s);

/// An element of a transformation set: a canonical index for finite sets,
/// a positive scale for the continuous scaling group.
struct GroupElement {
  GroupName group = GroupName::kFourFoldRotations;
  int index = 0;       // in [0, order) for finite sets
  double scale = 1.0;  // > 0, scaling group only

  bool is_identity() const;
};

/// Descriptor of a transformation set and its algebraic status.
struct TransformationGroup {
  GroupName name;
  int order;      // kInfiniteOrder for scaling
  bool is_group;  // false exactly for the Gaussian-blur levels

  GroupElement identity() const;
  GroupElement element(int index) const;
  GroupElement scaling_element(double scale) const;
};

TransformationGroup group(GroupName name);

/// Kernel sizes of the four blur levels; level 0 is the identity map.
inline constexpr std::array<int, 4> kBlurKernelSizes = {0, 5, 9, 15};

/// Applies the transformation to a CHW image tensor. Output shape equals
/// input shape; the identity element is a bitwise no-op.
Image apply(const GroupElement& g, const Image& x);

/// Group composition: apply(compose(g,h), x) == apply(g, apply(h, x)).
/// Throws NotAGroupError for the blur set.
GroupElement compose(const GroupElement& g, const GroupElement& h);

/// Throws NotAGroupError for the blur set.
GroupElement inverse(const GroupElement& g);

/// Uniform element for finite sets. For scaling, draws s uniform in
/// (1, s_max] and replaces it by 1/s with probability one half.
GroupElement sample(const TransformationGroup& grp, RngStream& rng,
                    double s_max = 0.0);

/// Binary class used for mirror-symmetric data: quarter-turn rotations
/// ({pi/2, -pi/2}) map to 1, the symmetry-preserving ones ({0, pi}) to 0.
int gpm_rotation_class(const GroupElement& g);

/// Jigsaw element indices enumerate all 24 tile permutations in
/// lexicographic order; index 0 is the identity.
const std::array<int, 4>& jigsaw_permutation(int index);
int jigsaw_index_of(const std::array<int, 4>& perm);

}  // namespace essl
