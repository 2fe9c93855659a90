#pragma once

#include "laflow/fields.hpp"

namespace laflow {

/// Align grid axes to RAS when the direction matrix is a signed axis
/// permutation. Voxel data is permuted/flipped and vector components are
/// remapped by the same rotation, so physical velocity is unchanged and
/// the direction becomes identity. General rotations are rejected
/// (resampling is out of scope).
Dataset reorient_to_ras(const Dataset& ds);

}  // namespace laflow
