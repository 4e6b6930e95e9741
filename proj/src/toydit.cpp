#include "tide/toydit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace tide::toydit {

void ToyDitConfig::validate() const {
    if (token_dim == 0 || head_dim == 0 || heads == 0 || blocks == 0 || mlp_hidden == 0) {
        throw std::invalid_argument("ToyDitConfig: dimensions must be positive");
    }
    if (token_dim != heads * head_dim) {
        throw std::invalid_argument("ToyDitConfig: token_dim must equal heads * head_dim");
    }
    if (rope.head_dim != head_dim) {
        throw std::invalid_argument("ToyDitConfig: rope.head_dim must equal head_dim");
    }
    if (trained_h < 1 || trained_w < 1 || text_len < 1) {
        throw std::invalid_argument("ToyDitConfig: layout counts must be >= 1");
    }
    rope.validate();
    timeshift.validate();
}

namespace {

double quantize_f32(double v) {
    return static_cast<double>(static_cast<float>(v));
}

std::vector<double> sinusoidal_freqs(std::size_t token_dim) {
    std::size_t half = token_dim / 2;
    std::vector<double> freqs(half);
    for (std::size_t k = 0; k < half; ++k) {
        freqs[k] = quantize_f32(
            std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half)));
    }
    return freqs;
}

std::vector<double> time_embedding(double t, const std::vector<double>& freqs) {
    std::vector<double> emb(2 * freqs.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        double angle = 1000.0 * t * freqs[k];
        emb[2 * k] = std::sin(angle);
        emb[2 * k + 1] = std::cos(angle);
    }
    return emb;
}

RowMatrix random_matrix(numeric::Pcg32& gen, std::size_t rows, std::size_t cols, double sigma) {
    RowMatrix m(rows, cols);
    for (double& v : m.data) {
        v = quantize_f32(sigma * gen.next_gaussian());
    }
    return m;
}

// Rows below text_len project through w_text, the rest through w_image.
RowMatrix project_joint(const RowMatrix& seq, std::size_t text_len, const RowMatrix& w_text,
                        const RowMatrix& w_image) {
    RowMatrix out(seq.rows, w_text.cols);
    numeric::parallel_rows(seq.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const RowMatrix& w = i < text_len ? w_text : w_image;
            const double* src = seq.data.data() + i * seq.cols;
            double* dst = out.data.data() + i * out.cols;
            for (std::size_t k = 0; k < seq.cols; ++k) {
                double s = src[k];
                const double* wrow = w.data.data() + k * w.cols;
                for (std::size_t j = 0; j < w.cols; ++j) {
                    dst[j] += s * wrow[j];
                }
            }
        }
    });
    return out;
}

RowMatrix slice_cols(const RowMatrix& m, std::size_t start, std::size_t count) {
    RowMatrix out(m.rows, count);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* src = m.data.data() + i * m.cols + start;
        std::copy(src, src + count, out.data.data() + i * count);
    }
    return out;
}

void put_cols(RowMatrix& dst, std::size_t start, const RowMatrix& src) {
    for (std::size_t i = 0; i < src.rows; ++i) {
        std::copy(src.row(i).begin(), src.row(i).end(), dst.data.data() + i * dst.cols + start);
    }
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

struct TensorRef {
    std::string name;
    RowMatrix* matrix = nullptr;
    std::vector<double>* vec = nullptr;

    std::size_t rows() const { return matrix ? matrix->rows : 1; }
    std::size_t cols() const { return matrix ? matrix->cols : vec->size(); }
    double* data() { return matrix ? matrix->data.data() : vec->data(); }
    const double* data() const { return matrix ? matrix->data.data() : vec->data(); }
    std::size_t count() const { return rows() * cols(); }
};

std::vector<TensorRef> tensor_list(ToyDitWeights& w) {
    std::vector<TensorRef> refs;
    for (std::size_t b = 0; b < w.blocks.size(); ++b) {
        auto& blk = w.blocks[b];
        std::string prefix = "block" + std::to_string(b) + ".";
        refs.push_back({prefix + "w_q_text", &blk.w_q_text, nullptr});
        refs.push_back({prefix + "w_k_text", &blk.w_k_text, nullptr});
        refs.push_back({prefix + "w_v_text", &blk.w_v_text, nullptr});
        refs.push_back({prefix + "w_q_image", &blk.w_q_image, nullptr});
        refs.push_back({prefix + "w_k_image", &blk.w_k_image, nullptr});
        refs.push_back({prefix + "w_v_image", &blk.w_v_image, nullptr});
        refs.push_back({prefix + "w_out", &blk.w_out, nullptr});
        refs.push_back({prefix + "mlp_in", &blk.mlp_in, nullptr});
        refs.push_back({prefix + "mlp_out", &blk.mlp_out, nullptr});
    }
    refs.push_back({"time_freqs", nullptr, &w.time_freqs});
    refs.push_back({"w_final", &w.w_final, nullptr});
    return refs;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash(const ToyDitConfig& c) {
    std::ostringstream os;
    os << "c=" << c.token_dim << ";d=" << c.head_dim << ";heads=" << c.heads
       << ";blocks=" << c.blocks << ";mlp=" << c.mlp_hidden << ";grid=" << c.trained_h << "x"
       << c.trained_w << ";text=" << c.text_len << ";seed=" << c.seed;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

ToyDitWeights make_weight_shell(const ToyDitConfig& config) {
    ToyDitWeights w;
    std::size_t c = config.token_dim;
    w.blocks.resize(config.blocks);
    for (auto& blk : w.blocks) {
        blk.w_q_text = RowMatrix(c, c);
        blk.w_k_text = RowMatrix(c, c);
        blk.w_v_text = RowMatrix(c, c);
        blk.w_q_image = RowMatrix(c, c);
        blk.w_k_image = RowMatrix(c, c);
        blk.w_v_image = RowMatrix(c, c);
        blk.w_out = RowMatrix(c, c);
        blk.mlp_in = RowMatrix(c, config.mlp_hidden);
        blk.mlp_out = RowMatrix(config.mlp_hidden, c);
    }
    w.time_freqs.assign(c / 2, 0.0);
    w.w_final = RowMatrix(c, c);
    return w;
}

}  // namespace

ToyDitWeights init_weights(const ToyDitConfig& config) {
    config.validate();
    ToyDitWeights w = make_weight_shell(config);
    double sigma = 1.0 / std::sqrt(static_cast<double>(config.token_dim));
    numeric::Pcg32 gen(config.seed, 1);
    for (auto& blk : w.blocks) {
        for (RowMatrix* m : {&blk.w_q_text, &blk.w_k_text, &blk.w_v_text, &blk.w_q_image,
                             &blk.w_k_image, &blk.w_v_image, &blk.w_out, &blk.mlp_in,
                             &blk.mlp_out}) {
            *m = random_matrix(gen, m->rows, m->cols, sigma);
        }
    }
    w.time_freqs = sinusoidal_freqs(config.token_dim);
    w.w_final = random_matrix(gen, config.token_dim, config.token_dim, sigma);
    return w;
}

void save_weights(const ToyDitWeights& weights, const ToyDitConfig& config,
                  const std::filesystem::path& path) {
    auto refs = tensor_list(const_cast<ToyDitWeights&>(weights));
    nlohmann::json manifest;
    manifest["format"] = "tide-weights-v1";
    manifest["config_hash"] = config_hash(config);
    auto& tensors = manifest["tensors"] = nlohmann::json::array();
    for (const auto& ref : refs) {
        tensors.push_back({{"name", ref.name}, {"rows", ref.rows()}, {"cols", ref.cols()}});
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("save_weights: cannot open " + path.string());
    }
    std::string header = manifest.dump();
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.put('\0');
    for (const auto& ref : refs) {
        for (std::size_t i = 0; i < ref.count(); ++i) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(ref.data()[i]));
            unsigned char bytes[4] = {
                static_cast<unsigned char>(bits & 0xff),
                static_cast<unsigned char>((bits >> 8) & 0xff),
                static_cast<unsigned char>((bits >> 16) & 0xff),
                static_cast<unsigned char>((bits >> 24) & 0xff),
            };
            out.write(reinterpret_cast<const char*>(bytes), 4);
        }
    }
    if (!out) {
        throw IoError("save_weights: write failed for " + path.string());
    }
}

ToyDitWeights load_weights(const std::filesystem::path& path, const ToyDitConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_weights: cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t nul = bytes.find('\0');
    if (nul == std::string::npos) {
        throw IoError("load_weights: missing manifest terminator");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(0, nul));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("load_weights: bad manifest: ") + e.what());
    }

    ToyDitWeights w = make_weight_shell(config);
    auto refs = tensor_list(w);
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != refs.size()) {
        throw IoError("load_weights: manifest tensor count does not match config");
    }
    std::size_t total = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != refs[i].name ||
            t.at("rows").get<std::size_t>() != refs[i].rows() ||
            t.at("cols").get<std::size_t>() != refs[i].cols()) {
            throw IoError("load_weights: tensor " + refs[i].name + " does not match config");
        }
        total += refs[i].count();
    }
    std::size_t blob = bytes.size() - nul - 1;
    if (blob != total * 4) {
        throw IoError("load_weights: blob length mismatch");
    }
    if (manifest.value("config_hash", "") != config_hash(config)) {
        std::fprintf(stderr, "warning: load_weights: config hash mismatch for %s\n",
                     path.string().c_str());
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + nul + 1;
    for (auto& ref : refs) {
        for (std::size_t i = 0; i < ref.count(); ++i) {
            std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                 (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) |
                                 (static_cast<std::uint32_t>(p[3]) << 24);
            ref.data()[i] = static_cast<double>(std::bit_cast<float>(bits));
            p += 4;
        }
    }
    return w;
}

std::pair<RowMatrix, attn::TokenLayout> patchify(const LatentGrid& latent,
                                                 const ToyDitConfig& config) {
    if (latent.h < 1 || latent.w < 1) {
        throw std::invalid_argument("patchify: grid dims must be >= 1");
    }
    if (latent.channels != config.token_dim) {
        throw std::invalid_argument("patchify: channel count does not match token_dim");
    }
    attn::TokenLayout layout{config.text_len, latent.h, latent.w};
    RowMatrix tokens(latent.h * latent.w, latent.channels);
    tokens.data = latent.data;
    return {std::move(tokens), layout};
}

LatentGrid unpatchify(const RowMatrix& tokens, const attn::TokenLayout& layout,
                      std::size_t channels) {
    if (tokens.rows != layout.image_len() || tokens.cols != channels) {
        throw std::invalid_argument("unpatchify: token shape does not match layout");
    }
    LatentGrid grid(layout.grid_h, layout.grid_w, channels);
    grid.data = tokens.data;
    return grid;
}

RowMatrix random_text_tokens(const ToyDitConfig& config) {
    numeric::Pcg32 gen(config.seed, 2);
    RowMatrix m(config.text_len, config.token_dim);
    for (double& v : m.data) {
        v = gen.next_gaussian();
    }
    return m;
}

LatentGrid random_noise(const ToyDitConfig& config, std::size_t grid_h, std::size_t grid_w) {
    numeric::Pcg32 gen(config.seed, 3);
    LatentGrid grid(grid_h, grid_w, config.token_dim);
    for (double& v : grid.data) {
        v = gen.next_gaussian();
    }
    return grid;
}

ResolvedPolicies resolve_policies(const ToyDitConfig& config, const attn::TokenLayout& layout) {
    ResolvedPolicies pol;
    double trained_pixels = static_cast<double>(config.trained_image_len());
    pol.lambda = std::max(1.0, static_cast<double>(layout.image_len()) / trained_pixels);
    pol.scale_h =
        std::max(1.0, static_cast<double>(layout.grid_h) / static_cast<double>(config.trained_h));
    pol.scale_w =
        std::max(1.0, static_cast<double>(layout.grid_w) / static_cast<double>(config.trained_w));

    if (config.anchor.enabled) {
        attn::AnchorPolicy anchor = config.anchor;
        anchor.lambda = pol.lambda;
        pol.beta = anchoring_bias(anchor);
    }

    pol.temperature = config.temperature;
    if (config.tau_min_auto && pol.temperature.mode != sched::TempMode::Off) {
        pol.temperature.tau_min = sched::yarn_temperature(std::sqrt(pol.lambda));
    }
    pol.temperature.validate();
    return pol;
}

RowMatrix forward(const RowMatrix& image_tokens, const RowMatrix& text_tokens,
                  const attn::TokenLayout& layout, double t, const ToyDitConfig& config,
                  const ToyDitWeights& weights, const AttnSink& sink, std::size_t step) {
    config.validate();
    layout.validate();
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("forward: t must lie in [0,1]");
    }
    if (image_tokens.rows != layout.image_len() || image_tokens.cols != config.token_dim) {
        throw std::invalid_argument("forward: image token shape does not match layout");
    }
    if (text_tokens.rows != layout.text_len || text_tokens.cols != config.token_dim) {
        throw std::invalid_argument("forward: text token shape does not match layout");
    }
    if (weights.blocks.size() != config.blocks) {
        throw std::invalid_argument("forward: weight block count does not match config");
    }

    std::size_t lt = layout.text_len;
    std::size_t li = layout.image_len();
    std::size_t total = lt + li;
    std::size_t c = config.token_dim;
    std::size_t d = config.head_dim;

    ResolvedPolicies pol = resolve_policies(config, layout);

    std::vector<rope::GridPos> positions;
    if (config.rope_on_text) {
        positions.reserve(total);
        for (std::size_t i = 0; i < lt; ++i) {
            positions.push_back({0, i});
        }
        auto grid = rope::axial_positions(layout.grid_h, layout.grid_w);
        positions.insert(positions.end(), grid.begin(), grid.end());
    } else {
        positions = rope::positions_for_layout(lt, layout.grid_h, layout.grid_w);
    }

    auto make_table = [&](rope::Axis axis, double scale) {
        rope::RopeSpec spec = config.rope;
        spec.scale_s = scale;
        spec.trained_len = static_cast<double>(axis == rope::Axis::Height ? config.trained_h
                                                                          : config.trained_w);
        rope::FrequencyTable base = rope::base_frequencies(spec, axis);
        if (config.timed_interpolation) {
            return rope::interpolate_timed(spec, base, t, [](double tt) { return 1.0 - tt; });
        }
        return rope::interpolate(spec, base);
    };
    rope::FrequencyTable table_h = make_table(rope::Axis::Height, pol.scale_h);
    rope::FrequencyTable table_w = make_table(rope::Axis::Width, pol.scale_w);

    bool per_frequency = pol.temperature.mode == sched::TempMode::DynamicPerFrequency;
    std::vector<double> band;
    if (per_frequency) {
        band = sched::band_scale_factors(table_h, table_w, t, pol.temperature);
    }
    // Per-frequency sharpening enters through the band factors; the global
    // divisor stays neutral to avoid double sharpening.
    double tau = per_frequency ? 1.0 : sched::dynamic_temperature(t, 0.0, pol.temperature);

    RowMatrix seq(total, c);
    std::vector<double> emb = time_embedding(t, weights.time_freqs);
    for (std::size_t i = 0; i < total; ++i) {
        const RowMatrix& src = i < lt ? text_tokens : image_tokens;
        std::size_t src_row = i < lt ? i : i - lt;
        double* dst = seq.data.data() + i * c;
        const double* s = src.data.data() + src_row * c;
        for (std::size_t j = 0; j < c; ++j) {
            dst[j] = s[j] + emb[j];
        }
    }

    for (std::size_t b = 0; b < config.blocks; ++b) {
        const auto& blk = weights.blocks[b];
        RowMatrix q = project_joint(seq, lt, blk.w_q_text, blk.w_q_image);
        RowMatrix k = project_joint(seq, lt, blk.w_k_text, blk.w_k_image);
        RowMatrix v = project_joint(seq, lt, blk.w_v_text, blk.w_v_image);

        RowMatrix attn_concat(total, c);
        for (std::size_t h = 0; h < config.heads; ++h) {
            RowMatrix q_h = slice_cols(q, h * d, d);
            RowMatrix k_h = slice_cols(k, h * d, d);
            RowMatrix v_h = slice_cols(v, h * d, d);
            RowMatrix q_rot = rope::rotate(q_h, positions, table_h, table_w, band);
            RowMatrix k_rot = rope::rotate(k_h, positions, table_h, table_w, band);
            attn::JointLogits s = attn::joint_logits(q_rot, k_rot, layout);
            RowMatrix p =
                attn::anchored_attention(s, pol.beta, tau, d, config.anchor.bias_rows);
            if (sink) {
                sink(AttnProbe{step, t, b, h, p, s, layout});
            }
            RowMatrix o = attn::attention_output(p, v_h);
            for (double x : o.data) {
                if (!std::isfinite(x)) {
                    throw NumericError("forward: non-finite attention output at block " +
                                       std::to_string(b) + " head " + std::to_string(h));
                }
            }
            put_cols(attn_concat, h * d, o);
        }
        RowMatrix attn_out = numeric::matmul(attn_concat, blk.w_out);
        for (std::size_t i = 0; i < seq.data.size(); ++i) {
            seq.data[i] += attn_out.data[i];
        }

        RowMatrix hidden = numeric::matmul(seq, blk.mlp_in);
        for (double& x : hidden.data) {
            x = gelu(x);
        }
        RowMatrix mlp = numeric::matmul(hidden, blk.mlp_out);
        for (std::size_t i = 0; i < seq.data.size(); ++i) {
            seq.data[i] += mlp.data[i];
        }
        try {
            numeric::ensure_finite(seq, "block output");
        } catch (const NumericError&) {
            throw NumericError("forward: non-finite sequence after block " + std::to_string(b));
        }
    }

    RowMatrix image_part(li, c);
    std::copy(seq.data.begin() + static_cast<std::ptrdiff_t>(lt * c), seq.data.end(),
              image_part.data.begin());
    return numeric::matmul(image_part, weights.w_final);
}

SampleResult euler_sample(const LatentGrid& noise, const RowMatrix& text_tokens,
                          const ToyDitConfig& config, const ToyDitWeights& weights,
                          const AttnSink& sink) {
    auto [tokens, layout] = patchify(noise, config);
    SampleResult result;
    result.mu = sched::shift_mu(layout.image_len(), config.timeshift);
    result.timesteps = sched::shifted_timesteps(config.timeshift, result.mu);

    RowMatrix x = std::move(tokens);
    for (std::size_t i = 0; i < config.timeshift.steps; ++i) {
        RowMatrix velocity =
            forward(x, text_tokens, layout, result.timesteps[i], config, weights, sink, i);
        double dt = result.timesteps[i + 1] - result.timesteps[i];
        for (std::size_t j = 0; j < x.data.size(); ++j) {
            x.data[j] += dt * velocity.data[j];
        }
    }
    result.latent = unpatchify(x, layout, config.token_dim);
    return result;
}

}  // namespace tide::toydit
