#include "posecast/pose.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "posecast/error.hpp"
#include "posecast/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "poseseq payload I/O assumes a little-endian host");

namespace posecast {

using ordered_json = nlohmann::ordered_json;

void Skeleton::validate() const {
    const int j = num_joints();
    if (j < 2) throw Error::validation("skeleton: needs at least 2 joints, got " + std::to_string(j));
    if (static_cast<int>(parent_index.size()) != j) {
        throw Error::validation("skeleton: joint_names has " + std::to_string(j) +
                                " entries but parent_index has " + std::to_string(parent_index.size()));
    }
    int roots = 0;
    for (int i = 0; i < j; ++i) {
        const int p = parent_index[i];
        if (p == -1) {
            ++roots;
        } else if (p < 0 || p >= j) {
            throw Error::validation("skeleton: parent_index[" + std::to_string(i) + "] = " +
                                    std::to_string(p) + " out of range");
        }
    }
    if (roots != 1) {
        throw Error::validation("skeleton: expected exactly one root (parent -1), found " +
                                std::to_string(roots));
    }
    // Walking to the root from every joint must terminate: no cycles.
    for (int i = 0; i < j; ++i) {
        int cur = i, steps = 0;
        while (parent_index[cur] != -1) {
            cur = parent_index[cur];
            if (++steps > j) throw Error::validation("skeleton: parent graph contains a cycle");
        }
    }
}

Skeleton Skeleton::canonical8() {
    Skeleton s;
    s.joint_names = {"pelvis", "chest", "neck", "head", "l_hand", "r_hand", "l_foot", "r_foot"};
    s.parent_index = {-1, 0, 1, 2, 1, 1, 0, 0};
    return s;
}

MotionMatrix canonical8_rest_pose() {
    MotionMatrix rest(8, 3);
    rest << 0.0, 0.0, 1000.0,     // pelvis
            0.0, 0.0, 1350.0,     // chest
            0.0, 0.0, 1500.0,     // neck
            0.0, 0.0, 1650.0,     // head
            -420.0, 0.0, 1280.0,  // l_hand
            420.0, 0.0, 1280.0,   // r_hand
            -140.0, 0.0, 80.0,    // l_foot
            140.0, 0.0, 80.0;     // r_foot
    return rest;
}

void PoseSequence::validate() const {
    skeleton.validate();
    if (!(fps > 0.0)) throw Error::validation("sequence: fps must be positive");
    if (frames.rows() < 1) throw Error::validation("sequence: needs at least one frame");
    if (frames.cols() != 3 * skeleton.num_joints()) {
        throw Error::validation("sequence: frames have " + std::to_string(frames.cols()) +
                                " columns, skeleton implies " + std::to_string(3 * skeleton.num_joints()));
    }
    if (!frames.allFinite()) throw Error::validation("sequence: frames contain non-finite values");
}

void MotionFamilySpec::validate() const {
    const int j = num_joints();
    if (j < 1) throw Error::validation("family spec: needs at least one joint row");
    if (amplitude_mm.cols() != 3) throw Error::validation("family spec: amplitude must be J x 3");
    if (frequency_hz.size() != j || phase_rad.size() != j) {
        throw Error::validation("family spec: frequency/phase length must match amplitude rows");
    }
    if ((amplitude_mm.array() < 0.0).any()) throw Error::validation("family spec: amplitudes must be >= 0");
    if ((frequency_hz.array() <= 0.0).any()) throw Error::validation("family spec: frequencies must be > 0");
    if (noise_std_mm < 0.0) throw Error::validation("family spec: noise_std must be >= 0");
}

std::vector<ForecastSample> window(const PoseSequence& seq, int observed, int future, int stride,
                                   const std::string& source_name, std::optional<int> family_label) {
    if (observed < 1 || future < 1) throw Error::validation("window: O and T must be >= 1");
    if (stride < 1) throw Error::validation("window: stride must be >= 1");
    std::vector<ForecastSample> out;
    const int need = observed + future;
    if (seq.num_frames() < need) return out;  // shorter than O+T: empty result, not an error
    for (int off = 0; off + need <= seq.num_frames(); off += stride) {
        ForecastSample s;
        s.observed = seq.frames.middleRows(off, observed);
        s.future = seq.frames.middleRows(off + observed, future);
        s.source_id = source_name + ":" + std::to_string(off);
        s.family_label = family_label;
        out.push_back(std::move(s));
    }
    return out;
}

void write_sequence(const PoseSequence& seq, const std::string& path) {
    seq.validate();
    ordered_json header;
    header["version"] = 1;
    header["fps"] = seq.fps;
    header["units"] = "mm";
    header["joint_names"] = seq.skeleton.joint_names;
    header["parent_index"] = seq.skeleton.parent_index;
    header["num_frames"] = seq.num_frames();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error::runtime("cannot open '" + path + "' for writing");
    out << header.dump() << "\n";
    out.write(reinterpret_cast<const char*>(seq.frames.data()),
              static_cast<std::streamsize>(sizeof(float)) * seq.frames.size());
    if (!out) throw Error::runtime("short write to '" + path + "'");
}

PoseSequence read_sequence(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::runtime("cannot open '" + path + "' for reading");
    std::string header_line;
    if (!std::getline(in, header_line)) throw Error::format("poseseq: missing header line");

    ordered_json header;
    try {
        header = ordered_json::parse(header_line);
    } catch (const std::exception& e) {
        throw Error::format(std::string("poseseq: header is not valid JSON: ") + e.what());
    }
    for (const char* key : {"version", "fps", "units", "joint_names", "parent_index", "num_frames"}) {
        if (!header.contains(key)) throw Error::format(std::string("poseseq: header missing field '") + key + "'");
    }
    if (header["version"].get<int>() != 1) {
        throw Error::format("poseseq: unsupported version " + header["version"].dump());
    }
    if (header["units"].get<std::string>() != "mm") {
        throw Error::format("poseseq: units must be \"mm\", got " + header["units"].dump());
    }

    PoseSequence seq;
    seq.fps = header["fps"].get<double>();
    seq.skeleton.joint_names = header["joint_names"].get<std::vector<std::string>>();
    seq.skeleton.parent_index = header["parent_index"].get<std::vector<int>>();
    const std::size_t names = seq.skeleton.joint_names.size();
    const std::size_t parents = seq.skeleton.parent_index.size();
    if (names != parents) {
        throw Error::format("poseseq: header inconsistency: joint_names has " + std::to_string(names) +
                            " entries but parent_index has " + std::to_string(parents));
    }
    const long long num_frames = header["num_frames"].get<long long>();
    if (num_frames < 1) throw Error::format("poseseq: num_frames must be >= 1, got " + std::to_string(num_frames));

    const long long j = static_cast<long long>(names);
    const long long count = num_frames * j * 3;
    seq.frames.resize(num_frames, j * 3);
    in.read(reinterpret_cast<char*>(seq.frames.data()),
            static_cast<std::streamsize>(sizeof(float)) * count);
    if (in.gcount() != static_cast<std::streamsize>(sizeof(float)) * count) {
        throw Error::format("poseseq: payload length mismatch: header declares " +
                            std::to_string(count * sizeof(float)) + " bytes of frames, got " +
                            std::to_string(in.gcount()));
    }
    char extra = 0;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw Error::format("poseseq: payload length mismatch: trailing bytes after declared frames");
    }
    if (!seq.frames.allFinite()) throw Error::validation("poseseq: frames contain non-finite values");
    seq.validate();
    return seq;
}

PoseSequence generate_family(const MotionFamilySpec& spec, int num_frames, std::uint64_t seed,
                             const Skeleton& skeleton, const MotionMatrix& rest_pose, double fps) {
    spec.validate();
    skeleton.validate();
    if (num_frames < 1) throw Error::validation("generate_family: num_frames must be >= 1");
    const int j = skeleton.num_joints();
    if (spec.num_joints() != j) {
        throw Error::validation("generate_family: spec has " + std::to_string(spec.num_joints()) +
                                " joints, skeleton has " + std::to_string(j));
    }
    if (rest_pose.rows() != j || rest_pose.cols() != 3) {
        throw Error::validation("generate_family: rest pose must be J x 3");
    }

    Rng rng(seed);
    PoseSequence seq;
    seq.skeleton = skeleton;
    seq.fps = fps;
    seq.frames.resize(num_frames, 3 * j);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int f = 0; f < num_frames; ++f) {
        const double t = static_cast<double>(f) / fps;
        for (int jj = 0; jj < j; ++jj) {
            const double s = std::sin(two_pi * spec.frequency_hz[jj] * t + spec.phase_rad[jj]);
            for (int c = 0; c < 3; ++c) {
                double v = rest_pose(jj, c) + spec.amplitude_mm(jj, c) * s + spec.drift_mm_per_s[c] * t;
                if (spec.noise_std_mm > 0.0) v += spec.noise_std_mm * rng.normal();
                seq.frames(f, 3 * jj + c) = static_cast<float>(v);
            }
        }
    }
    return seq;
}

PoseSequence generate_family(const MotionFamilySpec& spec, int num_frames, std::uint64_t seed) {
    return generate_family(spec, num_frames, seed, Skeleton::canonical8(), canonical8_rest_pose(), 25.0);
}

FrameMatrix shuffle_frames_motion(const FrameMatrix& motion, std::uint64_t seed) {
    Rng rng(seed);
    const auto perm = rng.permutation(static_cast<int>(motion.rows()));
    FrameMatrix out(motion.rows(), motion.cols());
    for (int f = 0; f < motion.rows(); ++f) out.row(f) = motion.row(perm[f]);
    return out;
}

FrameMatrix shuffle_joints_motion(const FrameMatrix& motion, std::uint64_t seed) {
    Rng rng(seed);
    const int j = static_cast<int>(motion.cols()) / 3;
    const auto perm = rng.permutation(j);
    FrameMatrix out(motion.rows(), motion.cols());
    for (int jj = 0; jj < j; ++jj) out.middleCols(3 * jj, 3) = motion.middleCols(3 * perm[jj], 3);
    return out;
}

ForecastSample shuffle_frames(const ForecastSample& sample, std::uint64_t seed) {
    ForecastSample out = sample;
    out.future = shuffle_frames_motion(sample.future, seed);
    return out;
}

ForecastSample shuffle_joints(const ForecastSample& sample, std::uint64_t seed) {
    ForecastSample out = sample;
    out.future = shuffle_joints_motion(sample.future, seed);
    return out;
}

}  // namespace posecast
