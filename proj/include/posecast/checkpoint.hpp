#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posecast/priors.hpp"
#include "posecast/sttrans.hpp"
#include "posecast/tensor.hpp"

namespace posecast {

// Archive layout shared by forecaster and cluster-model checkpoints: one
// newline-terminated JSON manifest line, then the named float32 blobs in
// manifest order (little-endian, row-major).
struct ArchiveBlob {
    std::string name;
    MatrixXd data;
};

void write_archive(const std::string& path, nlohmann::ordered_json manifest,
                   const std::vector<ArchiveBlob>& blobs);

struct Archive {
    nlohmann::json manifest;
    std::vector<ArchiveBlob> blobs;

    const ArchiveBlob& blob(const std::string& name) const;
};

Archive read_archive(const std::string& path, const std::string& expected_kind = "");

enum class ForecasterKind { ZeroVel, STTrans };
std::string to_string(ForecasterKind k);
ForecasterKind forecaster_kind_from_string(const std::string& s);

struct EpochLogEntry {
    int epoch;
    double train_loss;
    double val_a_mpjpe;
};

struct PriorSpec {
    PriorFamily family = PriorFamily::Sig5;
    PriorScope scope = PriorScope::TimeJoint;
    int degree = 0;

    bool operator==(const PriorSpec&) const = default;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::optional<PriorSpec> prior;
    double clip_norm = 1.0;
    STTransConfig model;
};

// A trained forecaster: weights, optional prior parameters, configuration
// and the per-epoch log.
struct Checkpoint {
    ForecasterKind kind = ForecasterKind::ZeroVel;
    int observed = 0, horizon = 0, joints = 0;
    TrainConfig train_cfg;
    std::optional<STTransModel> model;  // present iff kind == STTrans
    std::optional<PriorParams> prior;
    std::vector<EpochLogEntry> epoch_log;

    ForecastOutput forecast(const FrameMatrix& observed_window) const;
    ForecastOutput forecast(const MotionMatrix& observed_window) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace posecast
