#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "kgprune/analogy.hpp"
#include "kgprune/error.hpp"
#include "kgprune/simd.hpp"

namespace kgp {
namespace {

// Offsets of each parameter block inside the flat vector.
struct Layout {
    std::size_t n1, n2, d, width, stride;
    std::size_t conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b, total;

    explicit Layout(const ModelShape& s)
        : n1(s.conv1_filters), n2(s.conv2_filters), d(s.dimension), width(s.conv2_width()),
          stride(s.conv2_stride) {
        conv1_w = 0;
        conv1_b = conv1_w + n1 * 2;
        conv2_w = conv1_b + n1;
        conv2_b = conv2_w + n2 * n1 * 4;
        dense_w = conv2_b + n2;
        dense_b = dense_w + n2 * width;
        total = dense_b + 1;
    }

    std::size_t c2(std::size_t g, std::size_t f, std::size_t p, std::size_t o) const {
        return conv2_w + ((g * n1 + f) * 2 + p) * 2 + o;
    }
};

void validate_shape(const ModelShape& s) {
    if (s.dimension < 2) fail(ErrorKind::DimensionMismatch, "analogy model needs dimension >= 2");
    if (s.conv1_filters == 0 || s.conv2_filters == 0 || s.conv2_stride == 0)
        fail(ErrorKind::DimensionMismatch, "filter counts and stride must be >= 1");
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

struct Activations {
    std::vector<double> h1;   // n1 x 2 x d
    std::vector<double> h2;   // n2 x width
    double logit = 0.0;
};

Activations forward(const Layout& L, std::span<const double> w, const Quadruple& q) {
    Activations act;
    act.h1.resize(L.n1 * 2 * L.d);
    act.h2.assign(L.n2 * L.width, 0.0);
    for (std::size_t f = 0; f < L.n1; ++f) {
        const double w0 = w[L.conv1_w + 2 * f], w1 = w[L.conv1_w + 2 * f + 1], b = w[L.conv1_b + f];
        for (std::size_t p = 0; p < 2; ++p)
            simd::relu_affine2(w0, q.row(2 * p), w1, q.row(2 * p + 1), b,
                               std::span<double>(act.h1).subspan((f * 2 + p) * L.d, L.d));
    }
    for (std::size_t g = 0; g < L.n2; ++g) {
        std::span<double> z(act.h2.data() + g * L.width, L.width);
        std::fill(z.begin(), z.end(), w[L.conv2_b + g]);
        for (std::size_t f = 0; f < L.n1; ++f)
            for (std::size_t p = 0; p < 2; ++p) {
                const double* in = act.h1.data() + (f * 2 + p) * L.d;
                for (std::size_t o = 0; o < 2; ++o) {
                    const double k = w[L.c2(g, f, p, o)];
                    if (L.stride == 1) {
                        simd::axpy(k, std::span<const double>(in + o, L.width), z);
                    } else {
                        for (std::size_t j = 0; j < L.width; ++j) z[j] += k * in[j * L.stride + o];
                    }
                }
            }
        for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    act.logit = w[L.dense_b];
    for (std::size_t g = 0; g < L.n2; ++g)
        act.logit += simd::dot(w.subspan(L.dense_w + g * L.width, L.width),
                               std::span<const double>(act.h2.data() + g * L.width, L.width));
    return act;
}

}  // namespace

std::size_t param_count(const ModelShape& shape) {
    validate_shape(shape);
    return Layout(shape).total;
}

AnalogyModel::AnalogyModel(const ModelShape& shape) : shape_(shape) {
    validate_shape(shape);
    params_.assign(Layout(shape).total, 0.0);
}

AnalogyModel AnalogyModel::zeros(const ModelShape& shape) {
    return AnalogyModel(shape);
}

AnalogyModel AnalogyModel::random(const ModelShape& shape, std::uint64_t seed) {
    AnalogyModel m(shape);
    const Layout L(shape);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t begin, std::size_t count, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < count; ++i) m.params_[begin + i] = u(rng);
    };
    fill(L.conv1_w, L.n1 * 2, std::sqrt(6.0 / 2.0));
    fill(L.conv2_w, L.n2 * L.n1 * 4, std::sqrt(6.0 / static_cast<double>(4 * L.n1)));
    fill(L.dense_w, L.n2 * L.width, std::sqrt(6.0 / static_cast<double>(L.n2 * L.width + 1)));
    return m;
}

void AnalogyModel::check_input(const Quadruple& q) const {
    if (q.dimension() != shape_.dimension)
        fail(ErrorKind::DimensionMismatch, "quadruple dimension " + std::to_string(q.dimension()) +
                                               " does not match model dimension " +
                                               std::to_string(shape_.dimension));
}

double AnalogyModel::logit(const Quadruple& q) const {
    check_input(q);
    return forward(Layout(shape_), params_, q).logit;
}

double AnalogyModel::predict(const Quadruple& q) const {
    return sigmoid(logit(q));
}

double AnalogyModel::loss_and_gradient(const Quadruple& q, double label, std::span<double> grad) const {
    check_input(q);
    if (grad.size() != params_.size()) fail(ErrorKind::DimensionMismatch, "gradient buffer size");
    const Layout L(shape_);
    const std::span<const double> w = params_;
    const Activations act = forward(L, w, q);
    const double loss = softplus(act.logit) - label * act.logit;
    const double dlogit = sigmoid(act.logit) - label;

    grad[L.dense_b] += dlogit;
    std::vector<double> dz2(L.n2 * L.width);
    for (std::size_t g = 0; g < L.n2; ++g) {
        const std::span<const double> h2(act.h2.data() + g * L.width, L.width);
        simd::axpy(dlogit, h2, grad.subspan(L.dense_w + g * L.width, L.width));
        double bias_grad = 0.0;
        for (std::size_t j = 0; j < L.width; ++j) {
            const double v = h2[j] > 0.0 ? dlogit * w[L.dense_w + g * L.width + j] : 0.0;
            dz2[g * L.width + j] = v;
            bias_grad += v;
        }
        grad[L.conv2_b + g] += bias_grad;
    }

    std::vector<double> dh1(L.n1 * 2 * L.d, 0.0);
    for (std::size_t g = 0; g < L.n2; ++g) {
        const std::span<const double> dz(dz2.data() + g * L.width, L.width);
        for (std::size_t f = 0; f < L.n1; ++f)
            for (std::size_t p = 0; p < 2; ++p) {
                const double* in = act.h1.data() + (f * 2 + p) * L.d;
                double* din = dh1.data() + (f * 2 + p) * L.d;
                for (std::size_t o = 0; o < 2; ++o) {
                    const std::size_t k = L.c2(g, f, p, o);
                    if (L.stride == 1) {
                        grad[k] += simd::dot(dz, std::span<const double>(in + o, L.width));
                        simd::axpy(w[k], dz, std::span<double>(din + o, L.width));
                    } else {
                        for (std::size_t j = 0; j < L.width; ++j) {
                            grad[k] += dz[j] * in[j * L.stride + o];
                            din[j * L.stride + o] += w[k] * dz[j];
                        }
                    }
                }
            }
    }

    for (std::size_t f = 0; f < L.n1; ++f)
        for (std::size_t p = 0; p < 2; ++p) {
            const std::size_t base = (f * 2 + p) * L.d;
            double bias_grad = 0.0;
            for (std::size_t j = 0; j < L.d; ++j) {
                if (act.h1[base + j] <= 0.0) dh1[base + j] = 0.0;
                bias_grad += dh1[base + j];
            }
            const std::span<const double> dz(dh1.data() + base, L.d);
            grad[L.conv1_w + 2 * f] += simd::dot(dz, q.row(2 * p));
            grad[L.conv1_w + 2 * f + 1] += simd::dot(dz, q.row(2 * p + 1));
            grad[L.conv1_b + f] += bias_grad;
        }
    return loss;
}

// ---------------------------------------------------------------------------
// KGPM v1

namespace {

void write_block(std::ostream& out, std::string_view name, std::span<const double> values) {
    out << name << ' ' << values.size();
    char buf[32];
    for (double v : values) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out << ' ';
        out.write(buf, ptr - buf);
    }
    out << '\n';
}

[[noreturn]] void model_format_error(const std::string& what) {
    fail(ErrorKind::FormatError, "KGPM: " + what);
}

std::string expect_line(std::istream& in, std::string_view what) {
    std::string line;
    if (!std::getline(in, line)) model_format_error("missing " + std::string(what));
    return line;
}

std::map<std::string, std::string> key_values(std::istringstream& ss) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) model_format_error("bad attribute '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

std::size_t to_size(const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) model_format_error("bad integer '" + s + "'");
    return v;
}

}  // namespace

void save_model(std::ostream& out, const AnalogyModel& model) {
    const ModelShape& s = model.shape();
    const Layout L(s);
    const auto w = model.parameters();
    out << "KGPM v1\n";
    out << "dimension " << s.dimension << '\n';
    out << "layout rows=a,b,c,d\n";
    out << "conv1 filters=" << s.conv1_filters << " kernel=1x2 stride=1 padding=0 activation=relu\n";
    out << "conv2 filters=" << s.conv2_filters << " kernel=2x2 stride=" << s.conv2_stride
        << " padding=0 activation=relu\n";
    out << "dense inputs=" << s.conv2_filters * L.width << " activation=sigmoid\n";
    out << "params " << w.size() << '\n';
    write_block(out, "conv1.weight", w.subspan(L.conv1_w, L.n1 * 2));
    write_block(out, "conv1.bias", w.subspan(L.conv1_b, L.n1));
    write_block(out, "conv2.weight", w.subspan(L.conv2_w, L.n2 * L.n1 * 4));
    write_block(out, "conv2.bias", w.subspan(L.conv2_b, L.n2));
    write_block(out, "dense.weight", w.subspan(L.dense_w, L.n2 * L.width));
    write_block(out, "dense.bias", w.subspan(L.dense_b, 1));
}

void save_model(const std::filesystem::path& path, const AnalogyModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    save_model(out, model);
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

AnalogyModel load_model(std::istream& in) {
    if (expect_line(in, "header") != "KGPM v1") model_format_error("bad header");
    ModelShape shape;
    {
        std::istringstream ss(expect_line(in, "dimension"));
        std::string key;
        if (!(ss >> key >> shape.dimension) || key != "dimension") model_format_error("bad dimension line");
    }
    if (expect_line(in, "layout") != "layout rows=a,b,c,d") model_format_error("unsupported layout");
    auto layer = [&](std::string_view name) {
        std::istringstream ss(expect_line(in, name));
        std::string key;
        ss >> key;
        if (key != name) model_format_error("expected " + std::string(name) + " line");
        return key_values(ss);
    };
    auto c1 = layer("conv1");
    auto c2 = layer("conv2");
    auto dense = layer("dense");
    if (c1["kernel"] != "1x2" || c1["stride"] != "1" || c1["padding"] != "0" || c1["activation"] != "relu")
        model_format_error("unsupported conv1 configuration");
    if (c2["kernel"] != "2x2" || c2["padding"] != "0" || c2["activation"] != "relu")
        model_format_error("unsupported conv2 configuration");
    if (dense["activation"] != "sigmoid") model_format_error("unsupported dense activation");
    shape.conv1_filters = to_size(c1["filters"]);
    shape.conv2_filters = to_size(c2["filters"]);
    shape.conv2_stride = to_size(c2["stride"]);
    try {
        validate_shape(shape);
    } catch (const Error& e) {
        model_format_error(e.what());
    }
    const Layout L(shape);
    if (to_size(dense["inputs"]) != L.n2 * L.width) model_format_error("dense input width mismatch");

    AnalogyModel model = AnalogyModel::zeros(shape);
    {
        std::istringstream ss(expect_line(in, "params"));
        std::string key;
        std::size_t n = 0;
        if (!(ss >> key >> n) || key != "params" || n != L.total) model_format_error("parameter count mismatch");
    }
    auto w = model.parameters();
    auto block = [&](std::string_view name, std::size_t offset, std::size_t count) {
        const std::string line = expect_line(in, name);
        const char* p = line.data();
        const char* end = p + line.size();
        auto token = [&]() {
            while (p < end && *p == ' ') ++p;
            const char* start = p;
            while (p < end && *p != ' ') ++p;
            return std::string_view(start, p - start);
        };
        if (token() != name) model_format_error("expected block " + std::string(name));
        if (to_size(std::string(token())) != count) model_format_error("bad length for " + std::string(name));
        for (std::size_t i = 0; i < count; ++i) {
            const auto t = token();
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
                model_format_error("bad value in " + std::string(name));
            w[offset + i] = v;
        }
        if (!token().empty()) model_format_error("trailing values in " + std::string(name));
    };
    block("conv1.weight", L.conv1_w, L.n1 * 2);
    block("conv1.bias", L.conv1_b, L.n1);
    block("conv2.weight", L.conv2_w, L.n2 * L.n1 * 4);
    block("conv2.bias", L.conv2_b, L.n2);
    block("dense.weight", L.dense_w, L.n2 * L.width);
    block("dense.bias", L.dense_b, 1);
    return model;
}

AnalogyModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    return load_model(in);
}

// ---------------------------------------------------------------------------
// Training

double mean_loss(const AnalogyModel& model, std::span<const LabeledQuadruple> data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const auto& item : data) {
        const double z = model.logit(item.quadruple);
        total += softplus(z) - (item.valid ? z : 0.0);
    }
    return total / static_cast<double>(data.size());
}

TrainReport train_model(std::span<const LabeledQuadruple> data, const TrainConfig& config) {
    if (data.empty()) fail(ErrorKind::InsufficientData, "no training quadruples");
    const bool has_valid = std::any_of(data.begin(), data.end(), [](const auto& x) { return x.valid; });
    const bool has_invalid = std::any_of(data.begin(), data.end(), [](const auto& x) { return !x.valid; });
    if (!has_valid || !has_invalid)
        fail(ErrorKind::InsufficientData, "training data must contain both valid and invalid quadruples");
    if (config.batch_size == 0) fail(ErrorKind::InsufficientData, "batch size must be >= 1");

    const ModelShape shape{data.front().quadruple.dimension(), config.conv1_filters,
                           config.conv2_filters, config.conv2_stride};
    TrainReport report{AnalogyModel::random(shape, config.seed), 0.0, 0.0, {}};
    AnalogyModel& model = report.model;
    report.initial_loss = mean_loss(model, data);

    const std::size_t n_params = model.param_count();
    std::vector<double> grad(n_params), m(n_params, 0.0), v(n_params, 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t step = 0;

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed ^ 0xA5A5A5A5DEADBEEFULL);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < stop; ++i) {
                const auto& item = data[order[i]];
                epoch_loss += model.loss_and_gradient(item.quadruple, item.valid ? 1.0 : 0.0, grad);
            }
            if (!std::isfinite(epoch_loss))
                fail(ErrorKind::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
            const double inv = 1.0 / static_cast<double>(stop - start);
            auto w = model.parameters();
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < n_params; ++k) {
                const double g = grad[k] * inv;
                if (config.optimizer == Optimizer::Sgd) {
                    w[k] -= config.learning_rate * g;
                    continue;
                }
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                w[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
            }
        }
        report.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    report.final_loss = mean_loss(model, data);
    if (!std::isfinite(report.final_loss)) fail(ErrorKind::NonFiniteLoss, "final loss is non-finite");
    return report;
}

}  // namespace kgp
