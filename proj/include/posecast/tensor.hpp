#pragma once

#include <Eigen/Dense>

namespace posecast {

// A motion tensor (F frames, J joints, xyz) is stored as an F x 3J row-major
// matrix; the 3 coordinates of joint j in frame f live at (f, 3j..3j+2).
// Pose data is float32, matching the on-disk poseseq payload bit for bit.
using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Double-precision views of the same layout, used by all numeric kernels.
using MotionMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline MotionMatrix to_double(const FrameMatrix& m) { return m.cast<double>(); }
inline FrameMatrix to_float(const MotionMatrix& m) { return m.cast<float>(); }

// Rounds a double through float32; parameters are kept on the float32 grid so
// checkpoints (raw float32 blobs) round-trip field-exactly.
inline double snap_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace posecast
