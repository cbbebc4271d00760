#include "tacs/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "tacs/errors.hpp"
#include "tacs/parse.hpp"
#include "tacs/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tacs {

namespace {

constexpr std::uint32_t kSnapshotVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k)
        out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

struct Cursor {
    const std::string& data;
    std::size_t pos = 0;
    std::string where;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw ConfigError("truncated file: " + where);
    }
    void expect_magic(const char* magic) {
        need(4);
        if (data.compare(pos, 4, magic) != 0)
            throw ConfigError(where + " does not start with the " + magic + " magic");
        pos += 4;
    }
    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + k]))
                 << (8 * k);
        pos += 4;
        return v;
    }
    double get_f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + k]))
                    << (8 * k);
        pos += 8;
        return std::bit_cast<double>(bits);
    }
    bool done() const { return pos == data.size(); }
};

std::string opt_field(const std::optional<double>& v) {
    return v.has_value() ? format_double(*v) : std::string();
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

// Data lines of a CSV: comments and the column header skipped.
std::vector<std::string> csv_data_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        lines.push_back(line);
    }
    return lines;
}

std::string encode_mlp(const Mlp& net) {
    std::string out = "TMLP";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(net.activation));
    put_u32(out, static_cast<std::uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) put_u32(out, static_cast<std::uint32_t>(s));
    for (int l = 0; l < net.layer_count(); ++l) {
        const Eigen::MatrixXd& W = net.weights[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) put_f64(out, W(i, j));
        const Eigen::VectorXd& b = net.biases[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < b.size(); ++i) put_f64(out, b(i));
    }
    return out;
}

Mlp decode_mlp(const std::string& data, const std::string& where) {
    Cursor cur{data, 0, where};
    cur.expect_magic("TMLP");
    std::uint32_t version = cur.get_u32();
    if (version != kCheckpointVersion)
        throw ConfigError(where + ": unsupported checkpoint version " +
                          std::to_string(version));
    std::uint32_t act = cur.get_u32();
    if (act > 1) throw ConfigError(where + ": unknown activation code");
    std::uint32_t n_sizes = cur.get_u32();
    if (n_sizes < 2 || n_sizes > 64)
        throw ConfigError(where + ": implausible layer count");
    Mlp net;
    net.activation = static_cast<Activation>(act);
    net.layer_sizes.resize(n_sizes);
    for (auto& s : net.layer_sizes) {
        std::uint32_t v = cur.get_u32();
        if (v == 0 || v > (1u << 20)) throw ConfigError(where + ": implausible layer size");
        s = static_cast<int>(v);
    }
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        int fan_in = net.layer_sizes[l];
        int fan_out = net.layer_sizes[l + 1];
        Eigen::MatrixXd W(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) W(i, j) = cur.get_f64();
        Eigen::VectorXd b(fan_out);
        for (int i = 0; i < fan_out; ++i) b(i) = cur.get_f64();
        net.weights.push_back(std::move(W));
        net.biases.push_back(std::move(b));
    }
    if (!cur.done()) throw ConfigError(where + ": trailing bytes after the checkpoint");
    return net;
}

json read_sidecar(const std::string& path, const std::string& kind) {
    std::string text = read_text_file(path + ".json");
    json meta = json::parse(text, nullptr, false);
    if (meta.is_discarded())
        throw ConfigError(path + ".json is not valid JSON");
    if (!meta.contains("kind") || meta["kind"] != kind)
        throw ConfigError(path + ".json does not describe a " + kind + " checkpoint");
    return meta;
}

void write_checkpoint_pair(const std::string& path, const std::string& binary,
                           const json& meta) {
    atomic_write_text(path, binary);
    atomic_write_text(path + ".json", meta.dump(2) + "\n");
}

} // namespace

std::string fnv1a64_hex(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    if (!fs::exists(path))
        throw MissingPrerequisiteError("missing file: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw Error("failed reading " + path);
    return ss.str();
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_directory(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw Error("cannot create directory " + path + ": " + ec.message());
}

void atomic_write_text(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec)
            throw Error("cannot create directory " + target.parent_path().string() +
                        ": " + ec.message());
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out.good()) throw Error("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string csv_header_comment(const std::string& config_hash) {
    return "# config_hash=" + config_hash + " tool_version=" + kToolVersion + "\n";
}

void write_points_csv(const std::string& path, const std::vector<PointSet>& sets,
                      const std::string& config_hash) {
    if (sets.empty()) throw ConfigError("no point sets to write");
    Eigen::Index D = sets.front().cols();
    if (D != 2 && D != 3)
        throw ConfigError("point CSV is defined for 2-D and 3-D sets");
    std::string out = csv_header_comment(config_hash);
    out += D == 2 ? "sample_id,atom_index,x,y\n" : "sample_id,atom_index,x,y,z\n";
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const PointSet& x = sets[s];
        if (x.cols() != D) throw ConfigError("mixed dimensions in one point CSV");
        for (Eigen::Index a = 0; a < x.rows(); ++a) {
            out += std::to_string(s);
            out += ',';
            out += std::to_string(a);
            for (Eigen::Index j = 0; j < D; ++j) {
                out += ',';
                out += format_double(x(a, j));
            }
            out += '\n';
        }
    }
    atomic_write_text(path, out);
}

std::vector<PointSet> read_points_csv(const std::string& path) {
    std::vector<std::string> lines = csv_data_lines(read_text_file(path));
    if (lines.empty()) throw ConfigError(path + " holds no data rows");
    std::vector<std::vector<Eigen::RowVectorXd>> rows_by_sample;
    Eigen::Index D = -1;
    for (const std::string& line : lines) {
        std::vector<std::string> f = split_fields(line);
        if (f.size() != 4 && f.size() != 5)
            throw ConfigError(path + ": malformed row '" + line + "'");
        if (D < 0) D = static_cast<Eigen::Index>(f.size()) - 2;
        if (static_cast<Eigen::Index>(f.size()) - 2 != D)
            throw ConfigError(path + ": inconsistent column count");
        int sid = parse_int(f[0]);
        int aid = parse_int(f[1]);
        if (sid < 0 || aid < 0) throw ConfigError(path + ": negative index");
        if (sid == static_cast<int>(rows_by_sample.size())) rows_by_sample.emplace_back();
        if (sid != static_cast<int>(rows_by_sample.size()) - 1)
            throw ConfigError(path + ": sample ids must be consecutive");
        auto& rows = rows_by_sample.back();
        if (aid != static_cast<int>(rows.size()))
            throw ConfigError(path + ": atom indices must be consecutive");
        Eigen::RowVectorXd r(D);
        for (Eigen::Index j = 0; j < D; ++j) r(j) = parse_double(f[static_cast<std::size_t>(j) + 2]);
        rows.push_back(std::move(r));
    }
    std::vector<PointSet> sets;
    sets.reserve(rows_by_sample.size());
    for (const auto& rows : rows_by_sample) {
        PointSet x(static_cast<Eigen::Index>(rows.size()), D);
        for (std::size_t a = 0; a < rows.size(); ++a) x.row(static_cast<Eigen::Index>(a)) = rows[a];
        sets.push_back(std::move(x));
    }
    return sets;
}

void write_labels_csv(const std::string& path, const Eigen::VectorXd& labels,
                      const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "sample_id,c\n";
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += format_double(labels(i));
        out += '\n';
    }
    atomic_write_text(path, out);
}

Eigen::VectorXd read_labels_csv(const std::string& path) {
    std::vector<std::string> lines = csv_data_lines(read_text_file(path));
    Eigen::VectorXd labels(static_cast<Eigen::Index>(lines.size()));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::vector<std::string> f = split_fields(lines[i]);
        if (f.size() != 2) throw ConfigError(path + ": malformed row '" + lines[i] + "'");
        if (parse_int(f[0]) != static_cast<int>(i))
            throw ConfigError(path + ": sample ids must be consecutive");
        labels(static_cast<Eigen::Index>(i)) = parse_double(f[1]);
    }
    return labels;
}

std::string encode_snapshot(const PointSet& x) {
    std::string out = "TACS";
    put_u32(out, kSnapshotVersion);
    put_u32(out, static_cast<std::uint32_t>(x.rows()));
    put_u32(out, static_cast<std::uint32_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) put_f64(out, x(i, j));
    return out;
}

void write_snapshots(const std::string& path, const std::vector<PointSet>& sets) {
    std::string out;
    for (const PointSet& x : sets) out += encode_snapshot(x);
    atomic_write_text(path, out);
}

std::vector<PointSet> read_snapshots(const std::string& path) {
    std::string data = read_text_file(path);
    Cursor cur{data, 0, path};
    std::vector<PointSet> sets;
    while (!cur.done()) {
        cur.expect_magic("TACS");
        std::uint32_t version = cur.get_u32();
        if (version != kSnapshotVersion)
            throw ConfigError(path + ": unsupported snapshot version " +
                              std::to_string(version));
        std::uint32_t M = cur.get_u32();
        std::uint32_t D = cur.get_u32();
        if (M == 0 || D == 0 || M > (1u << 20) || D > (1u << 10))
            throw ConfigError(path + ": implausible snapshot shape");
        PointSet x(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(D));
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = cur.get_f64();
        sets.push_back(std::move(x));
    }
    return sets;
}

void save_score_checkpoint(const std::string& path, const ScoreModel& m, int T,
                           const std::string& config_hash) {
    json meta;
    meta["kind"] = "score";
    meta["tool_version"] = kToolVersion;
    meta["config_hash"] = config_hash;
    meta["atom_count"] = m.atom_count;
    meta["dim"] = m.dim;
    meta["conditional"] = m.conditional;
    meta["condition_dim"] = m.condition_dim;
    meta["null_token_trained"] = m.null_token_trained;
    meta["T"] = T;
    write_checkpoint_pair(path, encode_mlp(m.net), meta);
}

ScoreModel load_score_checkpoint(const std::string& path, int* T_out) {
    json meta = read_sidecar(path, "score");
    ScoreModel m;
    try {
        m.atom_count = meta.at("atom_count").get<int>();
        m.dim = meta.at("dim").get<int>();
        m.conditional = meta.at("conditional").get<bool>();
        m.condition_dim = meta.at("condition_dim").get<int>();
        m.null_token_trained = meta.at("null_token_trained").get<bool>();
        if (T_out != nullptr) *T_out = meta.at("T").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ".json is incomplete: " + e.what());
    }
    m.net = decode_mlp(read_text_file(path), path);
    int expected_in = m.coord_dim() + kTimeFeatureCount +
                      (m.conditional ? m.condition_dim + 1 : 0);
    if (m.net.input_dim() != expected_in || m.net.output_dim() != m.coord_dim())
        throw ConfigError(path + ": network shape contradicts its sidecar");
    return m;
}

void save_time_predictor_checkpoint(const std::string& path, const TimePredictor& tp,
                                    const std::string& config_hash) {
    json meta;
    meta["kind"] = "timepred";
    meta["tool_version"] = kToolVersion;
    meta["config_hash"] = config_hash;
    meta["T"] = tp.T;
    meta["atom_count"] = tp.atom_count;
    meta["dim"] = tp.dim;
    meta["feature_mode"] = feature_mode_name(tp.feature_mode);
    meta["conditional"] = tp.conditional;
    meta["condition_dim"] = tp.condition_dim;
    write_checkpoint_pair(path, encode_mlp(tp.net), meta);
}

TimePredictor load_time_predictor_checkpoint(const std::string& path) {
    json meta = read_sidecar(path, "timepred");
    TimePredictor tp;
    try {
        tp.T = meta.at("T").get<int>();
        tp.atom_count = meta.at("atom_count").get<int>();
        tp.dim = meta.at("dim").get<int>();
        tp.feature_mode = parse_feature_mode(meta.at("feature_mode").get<std::string>());
        tp.conditional = meta.at("conditional").get<bool>();
        tp.condition_dim = meta.at("condition_dim").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ".json is incomplete: " + e.what());
    }
    tp.net = decode_mlp(read_text_file(path), path);
    int expected_in = feature_count(tp.feature_mode, tp.atom_count, tp.dim) +
                      (tp.conditional ? tp.condition_dim : 0);
    if (tp.net.input_dim() != expected_in || tp.net.output_dim() != tp.T)
        throw ConfigError(path + ": network shape contradicts its sidecar");
    return tp;
}

void write_trajectory_csv(const std::string& path, const std::vector<ChainResult>& chains,
                          const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "chain_id,step_t,t_pred,guidance_norm,fallback_flag\n";
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (const TrajectoryStep& s : chains[c].trajectory.steps) {
            out += std::to_string(c);
            out += ',';
            out += std::to_string(s.t);
            out += ',';
            if (s.t_pred.has_value()) out += std::to_string(*s.t_pred);
            out += ',';
            if (s.guidance_norm.has_value()) out += format_double(*s.guidance_norm);
            out += ',';
            out += s.fallback ? '1' : '0';
            out += '\n';
        }
    }
    atomic_write_text(path, out);
}

void write_accuracy_csv(const std::string& path, const std::vector<BandAccuracy>& bands,
                        const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "band_lo,band_hi,top1,within_delta\n";
    for (const BandAccuracy& b : bands) {
        out += std::to_string(b.lo);
        out += ',';
        out += std::to_string(b.hi);
        out += ',';
        out += format_double(b.top1);
        out += ',';
        out += format_double(b.within_delta);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_drift_csv(const std::string& path, const std::vector<DriftRow>& rows,
                     const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "t,mean,std\n";
    for (const DriftRow& r : rows) {
        out += std::to_string(r.t);
        out += ',';
        out += format_double(r.mean);
        out += ',';
        out += opt_field(r.stddev);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_loss_csv(const std::string& path, const std::vector<double>& curve,
                    const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "epoch,loss\n";
    for (std::size_t e = 0; e < curve.size(); ++e) {
        out += std::to_string(e + 1);
        out += ',';
        out += format_double(curve[e]);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep,
                     std::uint64_t seed, const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "axis_value,mae,manifold_l2,invalid_rate,fallback_rate,n,seed\n";
    for (const SweepCell& cell : sweep.cells) {
        out += cell.axis_value;
        if (cell.report.has_value()) {
            const EvalReport& r = *cell.report;
            out += ',';
            out += format_double(r.mae);
            out += ',';
            out += format_double(r.manifold_l2);
            out += ',';
            out += format_double(r.invalid_rate);
            out += ',';
            out += format_double(r.fallback_rate);
            out += ',';
            out += std::to_string(r.n);
        } else {
            out += ",,,,,0";
        }
        out += ',';
        out += std::to_string(seed);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_per_sample_csv(const std::string& path, const std::vector<PerSampleRow>& rows,
                          const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "sample_id,value,target,abs_err,manifold\n";
    for (const PerSampleRow& r : rows) {
        out += std::to_string(r.sample_id);
        out += ',';
        out += opt_field(r.value);
        out += ',';
        out += format_double(r.target);
        out += ',';
        out += opt_field(r.abs_err);
        out += ',';
        out += format_double(r.manifold);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_plot_data_csv(const std::string& path, const std::vector<PlotSeries>& series,
                         const std::string& config_hash) {
    std::string out = csv_header_comment(config_hash);
    out += "series,x,y\n";
    for (const PlotSeries& s : series) {
        if (s.x.size() != s.y.size())
            throw ConfigError("plot series '" + s.name + "' has mismatched x/y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out += s.name;
            out += ',';
            out += format_double(s.x[i]);
            out += ',';
            out += format_double(s.y[i]);
            out += '\n';
        }
    }
    atomic_write_text(path, out);
}

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
    const double W = 640, H = 420;
    const double ml = 64, mr = 16, mt = 36, mb = 44;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const PlotSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + (ymin == 0 ? 1 : std::abs(ymin) * 0.1);
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto sy = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' viewBox='0 0 " << W << " " << H << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << W / 2 << "' y='22' text-anchor='middle' font-family='sans-serif'"
        << " font-size='14'>" << title << "</text>\n";
    svg << "<rect x='" << ml << "' y='" << mt << "' width='" << W - ml - mr << "' height='"
        << H - mt - mb << "' fill='none' stroke='#888'/>\n";
    for (int k = 0; k <= 4; ++k) {
        double fx = xmin + (xmax - xmin) * k / 4.0;
        double fy = ymin + (ymax - ymin) * k / 4.0;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", fx);
        svg << "<text x='" << sx(fx) << "' y='" << H - mb + 16
            << "' text-anchor='middle' font-family='sans-serif' font-size='10'>" << buf
            << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.4g", fy);
        svg << "<text x='" << ml - 6 << "' y='" << sy(fy) + 3
            << "' text-anchor='end' font-family='sans-serif' font-size='10'>" << buf
            << "</text>\n";
    }
    svg << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 8
        << "' text-anchor='middle' font-family='sans-serif' font-size='12'>" << x_label
        << "</text>\n";
    svg << "<text x='14' y='" << (mt + H - mb) / 2
        << "' text-anchor='middle' font-family='sans-serif' font-size='12'"
        << " transform='rotate(-90 14 " << (mt + H - mb) / 2 << ")'>" << y_label
        << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        const char* color = kColors[si % 6];
        std::ostringstream pts;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen_down = false;
                continue;
            }
            pts << (pen_down ? " L" : " M") << sx(s.x[i]) << ' ' << sy(s.y[i]);
            pen_down = true;
            svg << "<circle cx='" << sx(s.x[i]) << "' cy='" << sy(s.y[i])
                << "' r='2.5' fill='" << color << "'/>\n";
        }
        svg << "<path d='" << pts.str() << "' fill='none' stroke='" << color
            << "' stroke-width='1.5'/>\n";
        svg << "<rect x='" << ml + 10 << "' y='" << mt + 8 + 16 * static_cast<double>(si)
            << "' width='10' height='10' fill='" << color << "'/>\n"
            << "<text x='" << ml + 24 << "' y='" << mt + 17 + 16 * static_cast<double>(si)
            << "' font-family='sans-serif' font-size='11'>" << s.name << "</text>\n";
    }
    svg << "</svg>\n";
    atomic_write_text(path, svg.str());
}

} // namespace tacs
