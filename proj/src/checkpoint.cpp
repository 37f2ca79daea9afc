#include "gar/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "gar/detail/text_io.hpp"

namespace gar {

using detail::LineReader;
using detail::parse_count;
using detail::parse_real;
using detail::split_tokens;

namespace {

constexpr const char* kMagic = "GARMODEL";
constexpr int kVersion = 1;

void write_matrix(std::ostream& out, const Matrix& m) {
    out << "mat " << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out << (c ? " " : "") << format_real(m(r, c));
        }
        out << '\n';
    }
}

void write_vec(std::ostream& out, const Vec& v) {
    out << "vec " << v.size() << '\n';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_real(v[i]);
    out << '\n';
}

Matrix read_matrix(LineReader& r) {
    auto head = split_tokens(r.next("matrix header"));
    if (head.size() != 3 || head[0] != "mat") {
        throw ParseError(r.name() + ": expected 'mat <rows> <cols>'", r.line());
    }
    std::size_t rows = parse_count(head[1], r, "rows");
    std::size_t cols = parse_count(head[2], r, "cols");
    Matrix m(rows, cols);
    for (std::size_t row = 0; row < rows; ++row) {
        auto vals = split_tokens(r.next("matrix row"));
        if (vals.size() != cols) {
            throw ParseError(r.name() + ": expected " + std::to_string(cols) + " values",
                             r.line());
        }
        for (std::size_t c = 0; c < cols; ++c) m(row, c) = parse_real(vals[c], r);
    }
    return m;
}

Vec read_vec(LineReader& r) {
    auto head = split_tokens(r.next("vector header"));
    if (head.size() != 2 || head[0] != "vec") {
        throw ParseError(r.name() + ": expected 'vec <dim>'", r.line());
    }
    std::size_t dim = parse_count(head[1], r, "dim");
    auto vals = split_tokens(r.next("vector row"));
    if (vals.size() != dim) {
        throw ParseError(r.name() + ": expected " + std::to_string(dim) + " values", r.line());
    }
    Vec v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = parse_real(vals[i], r);
    return v;
}

LstmParams read_lstm_params(LineReader& r) {
    auto head = split_tokens(r.next("lstm header"));
    if (head.size() != 3 || head[0] != "lstm") {
        throw ParseError(r.name() + ": expected 'lstm <input_dim> <hidden_dim>'", r.line());
    }
    LstmParams p;
    p.input_dim = parse_count(head[1], r, "input dim");
    p.hidden_dim = parse_count(head[2], r, "hidden dim");
    p.w_xi = read_matrix(r);
    p.w_hi = read_matrix(r);
    p.w_xf = read_matrix(r);
    p.w_hf = read_matrix(r);
    p.w_xo = read_matrix(r);
    p.w_ho = read_matrix(r);
    p.w_xc = read_matrix(r);
    p.w_hc = read_matrix(r);
    p.b_i = read_vec(r);
    p.b_f = read_vec(r);
    p.b_o = read_vec(r);
    p.b_c = read_vec(r);
    return p;
}

SoftmaxHead read_head(LineReader& r) {
    SoftmaxHead h;
    h.w = read_matrix(r);
    h.b = read_vec(r);
    return h;
}

Encoder read_encoder(LineReader& r) {
    Encoder e;
    e.w1 = read_matrix(r);
    e.b1 = read_vec(r);
    e.w2 = read_matrix(r);
    e.b2 = read_vec(r);
    return e;
}

FcLayer read_fc(LineReader& r) {
    FcLayer f;
    f.w = read_matrix(r);
    f.b = read_vec(r);
    return f;
}

// "component <name> <0|1>"; returns whether the component payload follows.
bool read_component_flag(LineReader& r, const char* name) {
    auto toks = split_tokens(r.next("component line"));
    if (toks.size() != 3 || toks[0] != "component" || toks[1] != name) {
        throw ParseError(r.name() + ": expected 'component " + std::string(name) + " <0|1>'",
                         r.line());
    }
    return toks[2] == "1";
}

const char* strategy_name(PoolStrategy s) {
    return s == PoolStrategy::Max ? "max" : "avg";
}

PoolStrategy strategy_from(const std::string& s, const LineReader& r) {
    if (s == "max") return PoolStrategy::Max;
    if (s == "avg") return PoolStrategy::Average;
    throw ParseError(r.name() + ": unknown pool strategy '" + s + "'", r.line());
}

} // namespace

void write_lstm_params(std::ostream& out, const LstmParams& p) {
    out << "lstm " << p.input_dim << ' ' << p.hidden_dim << '\n';
    write_matrix(out, p.w_xi);
    write_matrix(out, p.w_hi);
    write_matrix(out, p.w_xf);
    write_matrix(out, p.w_hf);
    write_matrix(out, p.w_xo);
    write_matrix(out, p.w_ho);
    write_matrix(out, p.w_xc);
    write_matrix(out, p.w_hc);
    write_vec(out, p.b_i);
    write_vec(out, p.b_f);
    write_vec(out, p.b_o);
    write_vec(out, p.b_c);
}

void write_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    const ModelConfig& c = model.config;
    out << kMagic << ' ' << kVersion << '\n';
    out << "variant " << variant_name(c.variant) << '\n';
    out << "flags " << (model.stage1_done ? 1 : 0) << ' ' << (model.stage2_done ? 1 : 0) << '\n';
    out << "config " << c.obs_dim << ' ' << c.encoder_hidden << ' ' << c.feature_dim << ' '
        << c.stage1_hidden << ' ' << c.stage1_timesteps << ' ' << c.stage2_hidden << ' '
        << c.stage2_timesteps << ' ' << c.fc_dim << ' ' << strategy_name(c.pooling.strategy)
        << ' ' << c.pooling.groups << ' ' << c.num_actions << ' ' << c.num_activities << ' '
        << (c.stage2_loss_mode == LossMode::AllSteps ? "all" : "last") << ' ' << c.init_seed
        << '\n';

    const ModelParams& p = model.params;
    out << "component encoder " << (p.encoder ? 1 : 0) << '\n';
    if (p.encoder) {
        write_matrix(out, p.encoder->w1);
        write_vec(out, p.encoder->b1);
        write_matrix(out, p.encoder->w2);
        write_vec(out, p.encoder->b2);
    }
    out << "component stage1 " << (p.stage1 ? 1 : 0) << '\n';
    if (p.stage1) write_lstm_params(out, *p.stage1);
    out << "component person_head " << (p.person_head ? 1 : 0) << '\n';
    if (p.person_head) {
        write_matrix(out, p.person_head->w);
        write_vec(out, p.person_head->b);
    }
    out << "component fc " << (p.fc ? 1 : 0) << '\n';
    if (p.fc) {
        write_matrix(out, p.fc->w);
        write_vec(out, p.fc->b);
    }
    out << "component stage2 " << (p.stage2 ? 1 : 0) << '\n';
    if (p.stage2) write_lstm_params(out, *p.stage2);
    out << "component scene_head " << (p.scene_head ? 1 : 0) << '\n';
    if (p.scene_head) {
        write_matrix(out, p.scene_head->w);
        write_vec(out, p.scene_head->b);
    }
}

TrainedModel read_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    LineReader r(in, std::filesystem::path(path).filename().string());
    detail::expect_magic(r.next("magic line"), kMagic, kVersion, r);

    TrainedModel model;
    auto var = split_tokens(r.next("variant line"));
    if (var.size() != 2 || var[0] != "variant") {
        throw ParseError(r.name() + ": expected 'variant <name>'", r.line());
    }
    model.config.variant = variant_from_name(var[1]);

    auto flags = split_tokens(r.next("flags line"));
    if (flags.size() != 3 || flags[0] != "flags") {
        throw ParseError(r.name() + ": expected 'flags <s1> <s2>'", r.line());
    }
    model.stage1_done = flags[1] == "1";
    model.stage2_done = flags[2] == "1";

    auto cfg = split_tokens(r.next("config line"));
    if (cfg.size() != 15 || cfg[0] != "config") {
        throw ParseError(r.name() + ": expected a 14-field config line", r.line());
    }
    ModelConfig& c = model.config;
    c.obs_dim = parse_count(cfg[1], r, "obs_dim");
    c.encoder_hidden = parse_count(cfg[2], r, "encoder_hidden");
    c.feature_dim = parse_count(cfg[3], r, "feature_dim");
    c.stage1_hidden = parse_count(cfg[4], r, "stage1_hidden");
    c.stage1_timesteps = parse_count(cfg[5], r, "stage1_timesteps");
    c.stage2_hidden = parse_count(cfg[6], r, "stage2_hidden");
    c.stage2_timesteps = parse_count(cfg[7], r, "stage2_timesteps");
    c.fc_dim = parse_count(cfg[8], r, "fc_dim");
    c.pooling.strategy = strategy_from(cfg[9], r);
    c.pooling.groups = parse_count(cfg[10], r, "pooling groups");
    c.num_actions = parse_count(cfg[11], r, "num_actions");
    c.num_activities = parse_count(cfg[12], r, "num_activities");
    if (cfg[13] == "all") {
        c.stage2_loss_mode = LossMode::AllSteps;
    } else if (cfg[13] == "last") {
        c.stage2_loss_mode = LossMode::LastStep;
    } else {
        throw ParseError(r.name() + ": unknown loss mode '" + cfg[13] + "'", r.line());
    }
    c.init_seed = parse_count(cfg[14], r, "init_seed");

    if (read_component_flag(r, "encoder")) model.params.encoder = read_encoder(r);
    if (read_component_flag(r, "stage1")) model.params.stage1 = read_lstm_params(r);
    if (read_component_flag(r, "person_head")) model.params.person_head = read_head(r);
    if (read_component_flag(r, "fc")) model.params.fc = read_fc(r);
    if (read_component_flag(r, "stage2")) model.params.stage2 = read_lstm_params(r);
    if (read_component_flag(r, "scene_head")) model.params.scene_head = read_head(r);
    return model;
}

} // namespace gar
