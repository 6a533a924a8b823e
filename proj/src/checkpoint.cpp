#include "posecast/checkpoint.hpp"

#include <fstream>

#include "posecast/error.hpp"

namespace posecast {

using ordered_json = nlohmann::ordered_json;

void write_archive(const std::string& path, ordered_json manifest,
                   const std::vector<ArchiveBlob>& blobs) {
    ordered_json blob_list = ordered_json::array();
    for (const auto& b : blobs) {
        blob_list.push_back({{"name", b.name},
                             {"rows", b.data.rows()},
                             {"cols", b.data.cols()}});
    }
    manifest["blobs"] = std::move(blob_list);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error::runtime("cannot open '" + path + "' for writing");
    out << manifest.dump() << "\n";
    for (const auto& b : blobs) {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f =
            b.data.cast<float>();
        out.write(reinterpret_cast<const char*>(f.data()),
                  static_cast<std::streamsize>(sizeof(float)) * f.size());
    }
    if (!out) throw Error::runtime("short write to '" + path + "'");
}

Archive read_archive(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::runtime("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw Error::format("checkpoint: missing manifest line");
    Archive ar;
    try {
        ar.manifest = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw Error::format(std::string("checkpoint: corrupted manifest: ") + e.what());
    }
    if (!ar.manifest.contains("format_version")) {
        throw Error::format("checkpoint: manifest missing format_version");
    }
    if (ar.manifest["format_version"].get<int>() != 1) {
        throw Error::format("checkpoint: unsupported format_version " +
                            ar.manifest["format_version"].dump());
    }
    if (!expected_kind.empty() && ar.manifest.value("kind", "") != expected_kind) {
        throw Error::format("checkpoint: expected kind '" + expected_kind + "', found '" +
                            ar.manifest.value("kind", "") + "'");
    }
    for (const auto& item : ar.manifest.at("blobs")) {
        ArchiveBlob b;
        b.name = item.at("name").get<std::string>();
        const long rows = item.at("rows").get<long>();
        const long cols = item.at("cols").get<long>();
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f(rows, cols);
        in.read(reinterpret_cast<char*>(f.data()),
                static_cast<std::streamsize>(sizeof(float)) * rows * cols);
        if (in.gcount() != static_cast<std::streamsize>(sizeof(float)) * rows * cols) {
            throw Error::format("checkpoint: corrupted payload: blob '" + b.name + "' truncated");
        }
        b.data = f.cast<double>();
        ar.blobs.push_back(std::move(b));
    }
    char extra = 0;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw Error::format("checkpoint: corrupted payload: trailing bytes after declared blobs");
    }
    return ar;
}

const ArchiveBlob& Archive::blob(const std::string& name) const {
    for (const auto& b : blobs) {
        if (b.name == name) return b;
    }
    throw Error::format("checkpoint: missing blob '" + name + "'");
}

std::string to_string(ForecasterKind k) {
    return k == ForecasterKind::ZeroVel ? "zero_vel" : "st_trans";
}

ForecasterKind forecaster_kind_from_string(const std::string& s) {
    if (s == "zero_vel") return ForecasterKind::ZeroVel;
    if (s == "st_trans") return ForecasterKind::STTrans;
    throw Error::config("unknown forecaster kind '" + s + "' (expected zero_vel|st_trans)");
}

namespace {

ordered_json model_cfg_json(const STTransConfig& c) {
    return {{"num_blocks", c.num_blocks},
            {"model_width", c.model_width},
            {"num_heads", c.num_heads},
            {"mlp_hidden", c.mlp_hidden},
            {"dropout_rate", c.dropout_rate}};
}

STTransConfig model_cfg_from_json(const nlohmann::json& j) {
    STTransConfig c;
    c.num_blocks = j.at("num_blocks").get<int>();
    c.model_width = j.at("model_width").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    return c;
}

ordered_json train_cfg_json(const TrainConfig& c) {
    ordered_json j{{"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"learning_rate", c.learning_rate},
                   {"seed", c.seed},
                   {"clip_norm", c.clip_norm}};
    if (c.prior) {
        j["prior"] = {{"family", to_string(c.prior->family)},
                      {"scope", to_string(c.prior->scope)},
                      {"d", c.prior->degree}};
    } else {
        j["prior"] = nullptr;
    }
    return j;
}

TrainConfig train_cfg_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.clip_norm = j.at("clip_norm").get<double>();
    if (j.contains("prior") && !j["prior"].is_null()) {
        PriorSpec ps;
        ps.family = prior_family_from_string(j["prior"].at("family").get<std::string>());
        ps.scope = prior_scope_from_string(j["prior"].at("scope").get<std::string>());
        ps.degree = j["prior"].at("d").get<int>();
        c.prior = ps;
    }
    return c;
}

}  // namespace

ForecastOutput Checkpoint::forecast(const MotionMatrix& observed_window) const {
    ForecastOutput out;
    if (kind == ForecasterKind::ZeroVel) {
        out = zero_vel_forecast(observed_window, horizon > 0 ? horizon : 1);
    } else {
        if (!model) throw Error::runtime("checkpoint: st_trans weights not loaded");
        out.y_hat = model->forecast(observed_window);
    }
    if (prior) out.u = eval_prior_grid(*prior);
    return out;
}

ForecastOutput Checkpoint::forecast(const FrameMatrix& observed_window) const {
    return forecast(to_double(observed_window));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["kind"] = to_string(ckpt.kind);
    manifest["configs"] = {{"shape", ordered_json{{"observed", ckpt.observed},
                                                  {"horizon", ckpt.horizon},
                                                  {"joints", ckpt.joints}}},
                           {"train", train_cfg_json(ckpt.train_cfg)},
                           {"model", ckpt.kind == ForecasterKind::STTrans
                                         ? model_cfg_json(ckpt.train_cfg.model)
                                         : ordered_json(nullptr)}};
    manifest["prior"] = ckpt.prior ? ordered_json(ckpt.prior->to_json()) : ordered_json(nullptr);
    ordered_json log = ordered_json::array();
    for (const auto& e : ckpt.epoch_log) {
        log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_a_mpjpe", e.val_a_mpjpe}});
    }
    manifest["epoch_log"] = std::move(log);

    std::vector<ArchiveBlob> blobs;
    if (ckpt.kind == ForecasterKind::STTrans) {
        auto params = const_cast<Checkpoint&>(ckpt).model->params();
        for (const auto* p : params) blobs.push_back({p->name, p->value});
    }
    write_archive(path, std::move(manifest), blobs);
}

Checkpoint load_checkpoint(const std::string& path) {
    Archive ar = read_archive(path);
    Checkpoint ckpt;
    ckpt.kind = forecaster_kind_from_string(ar.manifest.at("kind").get<std::string>());
    const auto& shape = ar.manifest.at("configs").at("shape");
    ckpt.observed = shape.at("observed").get<int>();
    ckpt.horizon = shape.at("horizon").get<int>();
    ckpt.joints = shape.at("joints").get<int>();
    ckpt.train_cfg = train_cfg_from_json(ar.manifest.at("configs").at("train"));
    if (ckpt.kind == ForecasterKind::STTrans) {
        ckpt.train_cfg.model = model_cfg_from_json(ar.manifest.at("configs").at("model"));
        ckpt.model.emplace(ckpt.train_cfg.model, ckpt.observed, ckpt.horizon, ckpt.joints,
                           ckpt.train_cfg.seed);
        for (nn::Param* p : ckpt.model->params()) {
            const ArchiveBlob& b = ar.blob(p->name);
            if (b.data.rows() != p->value.rows() || b.data.cols() != p->value.cols()) {
                throw Error::format("checkpoint: blob '" + p->name + "' has shape (" +
                                    std::to_string(b.data.rows()) + ", " + std::to_string(b.data.cols()) +
                                    "), expected (" + std::to_string(p->value.rows()) + ", " +
                                    std::to_string(p->value.cols()) + ")");
            }
            p->value = b.data;
        }
    }
    if (!ar.manifest.at("prior").is_null()) {
        ckpt.prior = PriorParams::from_json(ar.manifest.at("prior"));
    }
    for (const auto& e : ar.manifest.at("epoch_log")) {
        ckpt.epoch_log.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                                  e.at("val_a_mpjpe").get<double>()});
    }
    return ckpt;
}

}  // namespace posecast
