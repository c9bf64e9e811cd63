#include "skelrec/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace skelrec {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json parse_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    try {
        json j;
        f >> j;
        return j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

std::string split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "test") return Split::Test;
    throw ParseError("unknown split: " + name);
}

std::optional<int> opt_int(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_number_integer()) throw ParseError(std::string(key) + " must be an integer");
    return j.at(key).get<int>();
}

json opt_to_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

JointMap joint_map_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("joint_map must be an object");
    JointMap m;
    m.root = j.at("root").get<int>();
    m.spine = j.at("spine").get<int>();
    m.hip_left = j.at("hip_left").get<int>();
    m.hip_right = j.at("hip_right").get<int>();
    return m;
}

json joint_map_to_json(const JointMap& m) {
    return {{"root", m.root}, {"spine", m.spine}, {"hip_left", m.hip_left},
            {"hip_right", m.hip_right}};
}

std::vector<JointFrame> frames_from_json(const json& j, int num_joints) {
    if (!j.is_array() || j.empty()) throw ParseError("empty sequence");
    std::vector<JointFrame> frames;
    frames.reserve(j.size());
    for (size_t t = 0; t < j.size(); ++t) {
        const json& jf = j[t];
        if (!jf.is_array() || static_cast<int>(jf.size()) != num_joints)
            throw ParseError("frame " + std::to_string(t) + " has " + std::to_string(jf.size()) +
                             " joints, expected " + std::to_string(num_joints));
        JointFrame f(num_joints, 3);
        for (int k = 0; k < num_joints; ++k) {
            const json& jj = jf[k];
            if (!jj.is_array() || jj.size() != 3)
                throw ParseError("joint " + std::to_string(k) + " of frame " + std::to_string(t) +
                                 " is not an [x,y,z] triple");
            for (int a = 0; a < 3; ++a) {
                const double v = jj[a].get<double>();
                if (!std::isfinite(v))
                    throw ParseError("non-finite coordinate at (" + std::to_string(t) + "," +
                                     std::to_string(k) + "," + std::to_string(a) + ")");
                f(k, a) = v;
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

json frames_to_json(const std::vector<JointFrame>& frames) {
    json out = json::array();
    for (const JointFrame& f : frames) {
        json jf = json::array();
        for (Eigen::Index k = 0; k < f.rows(); ++k) jf.push_back({f(k, 0), f(k, 1), f(k, 2)});
        out.push_back(std::move(jf));
    }
    return out;
}

}  // namespace

ActionSequence load_sequence_json(const std::filesystem::path& path) {
    json j = parse_file(path);
    try {
        ActionSequence seq;
        seq.id = j.at("id").get<std::string>();
        seq.label = opt_int(j, "label");
        seq.subject = opt_int(j, "subject");
        seq.view = opt_int(j, "view");
        const int num_joints = j.at("num_joints").get<int>();
        if (num_joints < 1) throw ParseError("num_joints must be positive");
        seq.joints = joint_map_from_json(j.at("joint_map"));
        seq.frames = frames_from_json(j.at("frames"), num_joints);
        return seq;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

ActionSequence load_sequence_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path.string() + ": empty file");
    int cols = 1;
    for (char c : line) cols += c == ',';
    if (cols < 3 || cols % 3 != 0)
        throw ParseError(path.string() + ": column count " + std::to_string(cols) +
                         " is not a multiple of 3");
    const int num_joints = cols / 3;

    ActionSequence seq;
    seq.id = path.stem().string();
    seq.joints = JointMap{0, 1, 2, 3};
    int t = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        JointFrame frame(num_joints, 3);
        std::stringstream ss(line);
        std::string cell;
        for (int c = 0; c < cols; ++c) {
            if (!std::getline(ss, cell, ','))
                throw ParseError(path.string() + ": short row at frame " + std::to_string(t));
            size_t used = 0;
            double v;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ": bad number '" + cell + "' at frame " +
                                 std::to_string(t));
            }
            if (used != cell.size())
                throw ParseError(path.string() + ": bad number '" + cell + "' at frame " +
                                 std::to_string(t));
            if (!std::isfinite(v))
                throw ParseError("non-finite coordinate at (" + std::to_string(t) + "," +
                                 std::to_string(c / 3) + "," + std::to_string(c % 3) + ")");
            frame(c / 3, c % 3) = v;
        }
        seq.frames.push_back(std::move(frame));
        ++t;
    }
    if (seq.frames.empty()) throw ParseError("empty sequence");
    if (num_joints < 4) seq.joints = JointMap{0, 0, 0, 0};  // caught later as invalid
    return seq;
}

ActionSequence load_sequence(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".json") return load_sequence_json(path);
    if (ext == ".csv") return load_sequence_csv(path);
    throw ParseError("unsupported sequence format: " + path.string());
}

void save_sequence_json(const std::filesystem::path& path, const ActionSequence& seq) {
    json j;
    j["id"] = seq.id;
    j["label"] = opt_to_json(seq.label);
    j["subject"] = opt_to_json(seq.subject);
    j["view"] = opt_to_json(seq.view);
    j["num_joints"] = seq.num_joints();
    j["joint_map"] = joint_map_to_json(seq.joints);
    j["frames"] = frames_to_json(seq.frames);
    write_text(path, j.dump() + "\n");
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    json j = parse_file(path);
    if (!j.is_array()) throw ParseError(path.string() + ": manifest must be an array");
    std::vector<ManifestEntry> entries;
    entries.reserve(j.size());
    try {
        for (const json& e : j) {
            ManifestEntry m;
            m.path = e.at("path").get<std::string>();
            m.split = split_from_name(e.at("split").get<std::string>());
            entries.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return entries;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    json j = json::array();
    for (const ManifestEntry& e : entries)
        j.push_back({{"path", e.path}, {"split", split_name(e.split)}});
    write_text(path, j.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    const std::vector<ManifestEntry> entries = load_manifest(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();
    Dataset ds;
    ds.provenance = manifest_path.filename().string();
    for (const ManifestEntry& e : entries) {
        const std::filesystem::path p = dir / e.path;
        if (!std::filesystem::exists(p)) throw IoError("manifest references missing file " + p.string());
        ds.sequences.push_back(load_sequence(p));
        ds.split.push_back(e.split);
    }
    return ds;
}

void save_processed(const std::filesystem::path& path, const Dataset& ds) {
    json seqs = json::array();
    for (int i = 0; i < ds.size(); ++i) {
        const ActionSequence& s = ds.sequences[i];
        json js;
        js["id"] = s.id;
        js["label"] = opt_to_json(s.label);
        js["subject"] = opt_to_json(s.subject);
        js["view"] = opt_to_json(s.view);
        js["joint_map"] = joint_map_to_json(s.joints);
        js["split"] = split_name(ds.split[i]);
        js["frames"] = frames_to_json(s.frames);
        if (!s.frame_valid.empty()) {
            json fv = json::array();
            for (bool b : s.frame_valid) fv.push_back(b ? 1 : 0);
            js["frame_valid"] = std::move(fv);
        }
        seqs.push_back(std::move(js));
    }
    json j{{"schema", 1}, {"provenance", ds.provenance}, {"sequences", std::move(seqs)}};
    write_text(path, j.dump() + "\n");
}

Dataset load_processed(const std::filesystem::path& path) {
    json j = parse_file(path);
    try {
        if (j.at("schema").get<int>() != 1)
            throw ParseError(path.string() + ": unsupported archive schema");
        Dataset ds;
        ds.provenance = j.value("provenance", std::string());
        for (const json& js : j.at("sequences")) {
            ActionSequence s;
            s.id = js.at("id").get<std::string>();
            s.label = opt_int(js, "label");
            s.subject = opt_int(js, "subject");
            s.view = opt_int(js, "view");
            s.joints = joint_map_from_json(js.at("joint_map"));
            const json& jf = js.at("frames");
            if (!jf.is_array() || jf.empty()) throw ParseError("empty sequence");
            const int num_joints = static_cast<int>(jf[0].size());
            s.frames = frames_from_json(jf, num_joints);
            if (js.contains("frame_valid")) {
                for (const json& b : js.at("frame_valid"))
                    s.frame_valid.push_back(b.get<int>() != 0);
                if (s.frame_valid.size() != s.frames.size())
                    throw ParseError("frame_valid length mismatch in " + s.id);
            }
            ds.sequences.push_back(std::move(s));
            ds.split.push_back(split_from_name(js.at("split").get<std::string>()));
        }
        return ds;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

namespace {

std::string norm_mode_name(NormMode m) { return m == NormMode::Global ? "global" : "per_axis"; }

NormMode norm_mode_from_name(const std::string& name) {
    if (name == "global") return NormMode::Global;
    if (name == "per_axis") return NormMode::PerAxis;
    throw ParseError("unknown normalization mode: " + name);
}

}  // namespace

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
    json j{{"schema", 1},
           {"mode", norm_mode_name(stats.mode)},
           {"min", {stats.min[0], stats.min[1], stats.min[2]}},
           {"max", {stats.max[0], stats.max[1], stats.max[2]}}};
    write_text(path, j.dump() + "\n");
}

NormStats load_norm_stats(const std::filesystem::path& path) {
    json j = parse_file(path);
    try {
        NormStats s;
        s.mode = norm_mode_from_name(j.at("mode").get<std::string>());
        for (int a = 0; a < 3; ++a) {
            s.min[a] = j.at("min")[a].get<double>();
            s.max[a] = j.at("max")[a].get<double>();
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, Model& model) {
    const std::vector<TensorRef> tensors = model_tensors(model);
    json header;
    header["schema"] = 1;
    header["dims"] = {{"layers", model.dims.layers},
                      {"hidden", model.dims.hidden},
                      {"input", model.dims.input}};
    header["strategy"] = strategy_name(model.decoder.strategy);
    header["seed"] = model.seed;
    json list = json::array();
    std::uint64_t offset = 0;
    for (const TensorRef& t : tensors) {
        list.push_back({{"name", t.name},
                        {"rows", t.rows},
                        {"cols", t.cols},
                        {"offset", offset}});
        offset += sizeof(double) * static_cast<std::uint64_t>(t.size());
    }
    header["tensors"] = std::move(list);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << header.dump() << '\n';
    for (const TensorRef& t : tensors)
        f.write(reinterpret_cast<const char*>(t.data),
                static_cast<std::streamsize>(sizeof(double) * t.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

namespace {

Model make_model_shell(const ModelDims& dims, DecoderStrategy strategy, std::uint64_t seed) {
    Model m;
    m.dims = dims;
    m.seed = seed;
    m.encoder.cells.resize(dims.layers);
    for (int l = 0; l < dims.layers; ++l) {
        const int in = l == 0 ? dims.input : 2 * dims.hidden;
        for (int dir = 0; dir < 2; ++dir) m.encoder.cells[l][dir] = GruCell::zeros(dims.hidden, in);
    }
    m.decoder.strategy = strategy;
    m.decoder.cell = GruCell::zeros(2 * dims.hidden, dims.input);
    m.decoder.w_y = Eigen::MatrixXd::Zero(dims.input, 2 * dims.hidden);
    m.decoder.b_y = Eigen::VectorXd::Zero(dims.input);
    return m;
}

}  // namespace

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::string header_line;
    if (!std::getline(f, header_line)) throw IoError(path.string() + ": missing header");
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": bad checkpoint header: " + e.what());
    }

    try {
        if (header.at("schema").get<int>() != 1)
            throw IoError(path.string() + ": unsupported checkpoint schema");
        ModelDims dims;
        dims.layers = header.at("dims").at("layers").get<int>();
        dims.hidden = header.at("dims").at("hidden").get<int>();
        dims.input = header.at("dims").at("input").get<int>();
        Model m = make_model_shell(dims, strategy_from_name(header.at("strategy").get<std::string>()),
                                   header.at("seed").get<std::uint64_t>());

        std::string payload((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

        std::map<std::string, TensorRef> by_name;
        for (TensorRef& t : model_tensors(m)) by_name.emplace(t.name, t);
        const json& list = header.at("tensors");
        if (list.size() != by_name.size())
            throw IoError(path.string() + ": checkpoint lists " + std::to_string(list.size()) +
                          " tensors, expected " + std::to_string(by_name.size()));
        for (const json& jt : list) {
            const std::string name = jt.at("name").get<std::string>();
            auto it = by_name.find(name);
            if (it == by_name.end()) throw IoError(path.string() + ": unknown tensor " + name);
            const TensorRef& t = it->second;
            if (jt.at("rows").get<Eigen::Index>() != t.rows ||
                jt.at("cols").get<Eigen::Index>() != t.cols)
                throw IoError(path.string() + ": shape mismatch for " + name);
            const std::uint64_t off = jt.at("offset").get<std::uint64_t>();
            const std::uint64_t bytes = sizeof(double) * static_cast<std::uint64_t>(t.size());
            if (off + bytes > payload.size())
                throw IoError(path.string() + ": payload truncated at " + name);
            std::memcpy(t.data, payload.data() + off, bytes);
        }
        return m;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": bad checkpoint header: " + e.what());
    }
}

void write_trainlog_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
    std::string out = "iteration,loss,lr,accuracy,seconds\n";
    for (const TrainLogRow& r : log) {
        out += std::to_string(r.iteration) + "," + fmt(r.loss) + "," + fmt(r.lr) + ",";
        if (r.has_accuracy) out += fmt(r.accuracy);
        char sec[32];
        std::snprintf(sec, sizeof(sec), "%.3f", r.seconds);
        out += std::string(",") + sec + "\n";
    }
    write_text(path, out);
}

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<FeatureRecord>& records) {
    if (records.empty()) throw std::invalid_argument("write_features_csv: no records");
    std::string out = "id,label";
    for (Eigen::Index i = 0; i < records[0].feature.size(); ++i)
        out += ",f" + std::to_string(i);
    out += "\n";
    for (const FeatureRecord& r : records) {
        out += r.id + "," + std::to_string(r.label);
        for (Eigen::Index i = 0; i < r.feature.size(); ++i) out += "," + fmt(r.feature[i]);
        out += "\n";
    }
    write_text(path, out);
}

void write_confusion_csv(const std::filesystem::path& path, const EvalResult& eval) {
    std::string out = "label";
    for (int v : eval.label_values) out += "," + std::to_string(v);
    out += "\n";
    for (int r = 0; r < eval.confusion.rows(); ++r) {
        out += std::to_string(eval.label_values[r]);
        for (int c = 0; c < eval.confusion.cols(); ++c)
            out += "," + std::to_string(eval.confusion(r, c));
        out += "\n";
    }
    write_text(path, out);
}

void write_pca_csv(const std::filesystem::path& path, const std::vector<PcaRow>& rows) {
    std::string out = "id,step,x,y,z,label\n";
    for (const PcaRow& r : rows)
        out += r.id + "," + std::to_string(r.step) + "," + fmt(r.x) + "," + fmt(r.y) + "," +
               fmt(r.z) + "," + std::to_string(r.label) + "\n";
    write_text(path, out);
}

ModelDims ExperimentConfig::model_dims(int input_dim) const {
    ModelDims d;
    d.layers = layers;
    d.hidden = hidden;
    d.input = input_dim;
    return d;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t;
    t.loss = loss_from_name(loss);
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.decay = decay;
    t.decay_interval = decay_interval;
    t.clip_norm = clip_norm;
    t.max_iterations = max_iterations;
    t.eval_interval = eval_interval;
    t.seed = seed;
    t.threads = threads;
    return t;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (strategy != "fixed_weights" && strategy != "fixed_states")
        fail("strategy must be fixed_weights or fixed_states");
    if (norm != "global" && norm != "per_axis") fail("norm must be global or per_axis");
    if (loss != "mse" && loss != "mae") fail("loss must be mse or mae");
    if (feature_kind != "raw" && feature_kind != "aec") fail("features.kind must be raw or aec");
    if (layers < 1) fail("model.layers must be >= 1");
    if (hidden < 1) fail("model.hidden must be >= 1");
    if (t_max < 1) fail("preprocess.t_max must be >= 1");
    if (classes < 1 || per_class < 1 || frames < 1 || joints < 4)
        fail("synth counts must be >= 1 (joints >= 4)");
    if (min_frames < 0 || min_frames > frames) fail("synth.min_frames must be in [0, frames]");
    if (noise < 0) fail("synth.noise must be >= 0");
    if (train_fraction < 0 || train_fraction > 1) fail("synth.train_fraction must be in [0,1]");
    if (batch_size < 1) fail("train.batch_size must be >= 1");
    if (learning_rate <= 0) fail("train.learning_rate must be > 0");
    if (decay <= 0 || decay > 1) fail("train.decay must be in (0,1]");
    if (decay_interval < 1) fail("train.decay_interval must be >= 1");
    if (clip_norm <= 0) fail("train.clip_norm must be > 0");
    if (max_iterations < 0) fail("train.max_iterations must be >= 0");
    if (eval_interval < 0) fail("train.eval_interval must be >= 0");
    if (threads < 1) fail("threads must be >= 1");
    if (aec_epochs < 0) fail("features.aec_epochs must be >= 0");
    if (aec_learning_rate <= 0) fail("features.aec_learning_rate must be > 0");
}

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("config: unknown key '" + where + it.key() + "'");
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& into, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + where + key + "'");
    }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    check_keys(j, "", {"schema", "seed", "out", "threads", "data", "checkpoint", "model",
                       "preprocess", "synth", "train", "features"});
    if (!j.contains("schema") || !j.at("schema").is_number_integer() ||
        j.at("schema").get<int>() != 1)
        throw ConfigError("config: schema must be the integer 1");

    ExperimentConfig c;
    read_into(j, "seed", c.seed, "");
    read_into(j, "out", c.out, "");
    read_into(j, "threads", c.threads, "");
    read_into(j, "data", c.data, "");
    read_into(j, "checkpoint", c.checkpoint, "");
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, "model.", {"layers", "hidden", "strategy"});
        read_into(m, "layers", c.layers, "model.");
        read_into(m, "hidden", c.hidden, "model.");
        read_into(m, "strategy", c.strategy, "model.");
    }
    if (j.contains("preprocess")) {
        const json& p = j.at("preprocess");
        check_keys(p, "preprocess.", {"t_max", "norm"});
        read_into(p, "t_max", c.t_max, "preprocess.");
        read_into(p, "norm", c.norm, "preprocess.");
    }
    if (j.contains("synth")) {
        const json& s = j.at("synth");
        check_keys(s, "synth.",
                   {"classes", "per_class", "frames", "min_frames", "joints", "noise",
                    "train_fraction"});
        read_into(s, "classes", c.classes, "synth.");
        read_into(s, "per_class", c.per_class, "synth.");
        read_into(s, "frames", c.frames, "synth.");
        read_into(s, "min_frames", c.min_frames, "synth.");
        read_into(s, "joints", c.joints, "synth.");
        read_into(s, "noise", c.noise, "synth.");
        read_into(s, "train_fraction", c.train_fraction, "synth.");
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train.",
                   {"loss", "batch_size", "learning_rate", "decay", "decay_interval", "clip_norm",
                    "max_iterations", "eval_interval"});
        read_into(t, "loss", c.loss, "train.");
        read_into(t, "batch_size", c.batch_size, "train.");
        read_into(t, "learning_rate", c.learning_rate, "train.");
        read_into(t, "decay", c.decay, "train.");
        read_into(t, "decay_interval", c.decay_interval, "train.");
        read_into(t, "clip_norm", c.clip_norm, "train.");
        read_into(t, "max_iterations", c.max_iterations, "train.");
        read_into(t, "eval_interval", c.eval_interval, "train.");
    }
    if (j.contains("features")) {
        const json& ft = j.at("features");
        check_keys(ft, "features.", {"kind", "aec_epochs", "aec_learning_rate", "pca"});
        read_into(ft, "kind", c.feature_kind, "features.");
        read_into(ft, "aec_epochs", c.aec_epochs, "features.");
        read_into(ft, "aec_learning_rate", c.aec_learning_rate, "features.");
        read_into(ft, "pca", c.pca, "features.");
    }
    c.validate();
    return c;
}

}  // namespace skelrec
