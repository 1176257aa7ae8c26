#include "amff/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "amff/error.hpp"
#include "byte_io.hpp"

namespace amff {

using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr char kMagic[4] = {'A', 'M', 'F', 'C'};

void put_string(ByteWriter& w, const std::string& s) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    w.bytes(s);
}

std::string get_string(ByteReader& r) { return r.str(r.u32()); }

void put_range(ByteWriter& w, const std::optional<LabelRange>& range) {
    w.u8(range ? 1 : 0);
    w.f64(range ? range->min : 0.0);
    w.f64(range ? range->max : 0.0);
}

std::optional<LabelRange> get_range(ByteReader& r) {
    const bool present = r.u8() != 0;
    const double lo = r.f64();
    const double hi = r.f64();
    if (!present) return std::nullopt;
    return LabelRange{lo, hi};
}

void put_params(ByteWriter& w, const ModelParams& p) {
    for (const auto& b : p.blocks()) {
        for (double x : b.values) w.f64(x);
    }
}

void get_params(ByteReader& r, ModelParams& p) {
    for (auto& b : p.blocks()) {
        for (double& x : b.values) x = r.f64();
    }
}

void put_vectors(ByteWriter& w, const std::vector<Vec>& vs) {
    for (const Vec& v : vs) {
        for (double x : v) w.f64(x);
    }
}

void get_vectors(ByteReader& r, std::vector<Vec>& vs) {
    for (Vec& v : vs) {
        for (double& x : v) x = r.f64();
    }
}

std::string history_to_json(const std::vector<EpochRecord>& history) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : history) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["lr"] = e.lr;
        j["loss_c"] = e.loss_c;
        j["loss_v"] = e.loss_v;
        j["loss_a"] = e.loss_a;
        j["loss_total"] = e.loss_total;
        j["val_srcc"] = e.val_srcc;
        j["val_mean"] = e.val_mean;
        arr.push_back(j);
    }
    return arr.dump();
}

std::vector<EpochRecord> history_from_json(const std::string& text) {
    std::vector<EpochRecord> out;
    try {
        for (const auto& j : nlohmann::json::parse(text)) {
            EpochRecord e;
            e.epoch = j.at("epoch").get<std::size_t>();
            e.lr = j.at("lr").get<double>();
            e.loss_c = j.at("loss_c").get<double>();
            e.loss_v = j.at("loss_v").get<double>();
            e.loss_a = j.at("loss_a").get<double>();
            e.loss_total = j.at("loss_total").get<double>();
            e.val_srcc = j.at("val_srcc").get<std::map<std::string, double>>();
            e.val_mean = j.at("val_mean").get<double>();
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("checkpoint history: ") + e.what());
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TrainConfig& config, const TrainState& state) {
    state.current.validate();
    state.best.validate();
    ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kCheckpointVersion);
    put_string(w, config.to_json());
    w.u32(static_cast<std::uint32_t>(state.current.dim()));
    w.u32(static_cast<std::uint32_t>(state.current.aff.hidden()));
    w.u32(static_cast<std::uint32_t>(state.current.head_v.hidden()));
    w.u8(static_cast<std::uint8_t>(state.current.similarity));
    put_range(w, state.scaler.quality);
    put_range(w, state.scaler.authenticity);
    w.u64(state.epoch);
    w.f64(state.best_score);
    w.u64(state.best_epoch);
    w.u64(state.since_improve);
    w.u8(state.finished ? 1 : 0);
    put_string(w, state.stop_reason);
    put_string(w, state.shuffle_rng.serialize());
    put_params(w, state.best);
    put_params(w, state.current);
    w.u64(state.optimizer.step);
    w.f64(state.optimizer.beta1);
    w.f64(state.optimizer.beta2);
    w.f64(state.optimizer.eps);
    put_vectors(w, state.optimizer.m);
    put_vectors(w, state.optimizer.v);
    put_string(w, history_to_json(state.history));
    return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    require(r.str(4) == std::string(kMagic, 4), ErrorCode::Format, "bad magic, not a checkpoint file");
    const std::uint32_t version = r.u32();
    require(version == kCheckpointVersion, ErrorCode::Format,
            "unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config = TrainConfig::from_json(get_string(r));
    const std::uint32_t dim = r.u32();
    const std::uint32_t aff_h = r.u32();
    const std::uint32_t mlp_h = r.u32();
    require(dim > 0 && aff_h > 0 && mlp_h > 0, ErrorCode::Format, "checkpoint: zero tensor dimension");
    const std::uint8_t sim = r.u8();
    require(sim <= 2, ErrorCode::Format, "checkpoint: unknown similarity kind");

    TrainState& s = ck.state;
    ModelParams shape;
    shape.aff = AffParams::zeros(dim, aff_h);
    shape.head_v = MlpParams::zeros(dim, mlp_h);
    shape.head_a = MlpParams::zeros(dim, mlp_h);
    shape.similarity = static_cast<Similarity>(sim);
    s.scaler.quality = get_range(r);
    s.scaler.authenticity = get_range(r);
    s.epoch = r.u64();
    s.best_score = r.f64();
    s.best_epoch = r.u64();
    s.since_improve = r.u64();
    s.finished = r.u8() != 0;
    s.stop_reason = get_string(r);
    s.shuffle_rng = Rng::deserialize(get_string(r));
    s.best = shape;
    s.current = shape;
    get_params(r, s.best);
    get_params(r, s.current);
    s.optimizer = AdamState::like(shape);
    s.optimizer.step = r.u64();
    s.optimizer.beta1 = r.f64();
    s.optimizer.beta2 = r.f64();
    s.optimizer.eps = r.f64();
    get_vectors(r, s.optimizer.m);
    get_vectors(r, s.optimizer.v);
    s.history = history_from_json(get_string(r));
    require(r.remaining() == 0, ErrorCode::Format, "checkpoint: trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, const TrainState& state) {
    const auto bytes = encode_checkpoint(config, state);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace amff
