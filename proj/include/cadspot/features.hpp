#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "cadspot/sampler.hpp"

namespace cadspot {

/// Row-major feature matrix: one row per point (PointFeatures) or per primitive (PrimitiveFeatures).
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class PoolMode { Max, Average, Mixed };

/// Primitive Mixed Pooling: per channel, max over the primitive's points plus their mean.
FeatureMatrix mixed_pool(const FeatureMatrix& point_features, const DensePointCloud& cloud);

/// Pools point rows into primitive rows with the selected reduction.
/// Throws ArgumentError when the row count differs from the cloud size or a primitive owns no points.
FeatureMatrix pool_variant(const FeatureMatrix& point_features, const DensePointCloud& cloud, PoolMode mode);

inline constexpr int kDescriptorSize = 19;

/// Hand-built shape descriptor used by the geometric baseline predictor. It is
/// not a learned feature: kind one-hot (7), log arc length, principal-axis
/// aspect ratio, end-gap ratio, 8-bin soft histogram of turning angles, and the
/// normalized total turning. Invariant to translation and rotation.
std::vector<double> describe_primitive(const Primitive& primitive, std::span<const Point3> samples);

/// describe_primitive for every primitive, stacked as an N x kDescriptorSize matrix.
FeatureMatrix describe_drawing(const Drawing& drawing, const DensePointCloud& cloud);

}  // namespace cadspot
