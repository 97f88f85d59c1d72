#include "dirlatent/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dirlatent/errors.hpp"

namespace dirlatent {

void ToyConfig::validate() const {
    if (frames <= 0 || height <= 0 || width <= 0) {
        throw ContractError("toy config: frames and extents must be positive");
    }
}

void DegradeConfig::validate() const {
    if (blur_sigma_min < 0.0 || blur_sigma_max < blur_sigma_min) {
        throw ContractError("degrade config: blur sigma range must be 0 <= min <= max");
    }
    if (noise_sigma_min < 0.0 || noise_sigma_max < noise_sigma_min) {
        throw ContractError("degrade config: noise sigma range must be 0 <= min <= max");
    }
    if (down_factors.empty()) throw ContractError("degrade config: empty downsample factor set");
    for (int64_t f : down_factors) {
        if (f < 1) throw ContractError("degrade config: downsample factors must be >= 1");
    }
    if (quant_levels.empty()) throw ContractError("degrade config: empty quantization level set");
    for (int64_t q : quant_levels) {
        if (q < 2) throw ContractError("degrade config: quantization needs at least 2 levels");
    }
}

namespace data {
namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Antialiased coverage of a shape from its signed pixel distance (outside
// positive): full inside, linear falloff across a one-pixel band.
double coverage(double signed_dist) { return clamp01(0.5 - signed_dist); }

struct ToyScene {
    // Background plane wave.
    double bg_fx, bg_fy, bg_phase, bg_drift, bg_base, bg_amp;
    double bg_tint[3];
    // Face placement and motion (pixel units, radians).
    double cx0, cy0, vx, vy, theta0, omega;
    double semi_x, semi_y;
    double face_value, face_tint[3];
    // Eyes and mouth, in face-local coordinates.
    double eye_dx, eye_dy, eye_r, eye_value;
    double mouth_cy, mouth_r, mouth_half_angle, mouth_thick, mouth_value;
};

ToyScene draw_scene(const ToyConfig& cfg, Rng& rng) {
    const double ext = static_cast<double>(std::min(cfg.height, cfg.width));
    ToyScene s;
    s.bg_fx = rng.uniform(1.5, 3.5);
    s.bg_fy = rng.uniform(1.5, 3.5);
    s.bg_phase = rng.uniform(0.0, 2.0 * M_PI);
    s.bg_drift = rng.uniform(-0.15, 0.15);
    s.bg_base = rng.uniform(0.45, 0.60);
    s.bg_amp = rng.uniform(0.12, 0.20);
    for (double& t : s.bg_tint) t = rng.uniform(0.85, 1.0);

    s.cx0 = rng.uniform(0.38, 0.62) * static_cast<double>(cfg.width);
    s.cy0 = rng.uniform(0.38, 0.62) * static_cast<double>(cfg.height);
    s.vx = rng.uniform(-0.8, 0.8);
    s.vy = rng.uniform(-0.8, 0.8);
    s.theta0 = rng.uniform(0.0, 2.0 * M_PI);
    s.omega = rng.uniform(-0.05, 0.05);
    s.semi_x = rng.uniform(0.14, 0.20) * ext;
    s.semi_y = s.semi_x * rng.uniform(1.15, 1.35);
    s.face_value = rng.uniform(0.75, 0.90);
    for (double& t : s.face_tint) t = rng.uniform(0.9, 1.0);

    s.eye_dx = rng.uniform(0.40, 0.50) * s.semi_x;
    s.eye_dy = -rng.uniform(0.20, 0.30) * s.semi_y;
    s.eye_r = rng.uniform(0.10, 0.14) * s.semi_x + 1.0;
    s.eye_value = rng.uniform(0.05, 0.15);

    s.mouth_cy = rng.uniform(0.15, 0.30) * s.semi_y;
    s.mouth_r = rng.uniform(0.45, 0.60) * s.semi_x;
    s.mouth_half_angle = rng.uniform(0.45, 0.70);
    s.mouth_thick = rng.uniform(1.2, 1.8);
    s.mouth_value = rng.uniform(0.10, 0.20);
    return s;
}

Tensor render_frame(const ToyScene& s, const ToyConfig& cfg, int64_t t) {
    const double ft = static_cast<double>(t);
    const double cx = s.cx0 + s.vx * ft;
    const double cy = s.cy0 + s.vy * ft;
    const double theta = s.theta0 + s.omega * ft;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double edge = std::min(s.semi_x, s.semi_y);

    std::vector<double> px(static_cast<size_t>(cfg.height * cfg.width * 3));
    for (int64_t y = 0; y < cfg.height; ++y) {
        for (int64_t x = 0; x < cfg.width; ++x) {
            const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(cfg.width);
            const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(cfg.height);
            const double wave = std::sin(2.0 * M_PI * (s.bg_fx * u + s.bg_fy * v) + s.bg_phase +
                                         s.bg_drift * ft);
            const double bg = s.bg_base + s.bg_amp * wave;

            // Face-local coordinates (rotate the pixel into the face frame).
            const double dx = static_cast<double>(x) + 0.5 - cx;
            const double dy = static_cast<double>(y) + 0.5 - cy;
            const double lx = ct * dx + st * dy;
            const double ly = -st * dx + ct * dy;

            const double nr = std::hypot(lx / s.semi_x, ly / s.semi_y);
            const double face_cov = coverage((nr - 1.0) * edge);

            double eye_cov = 0.0;
            for (double sign : {-1.0, 1.0}) {
                const double d = std::hypot(lx - sign * s.eye_dx, ly - s.eye_dy) - s.eye_r;
                eye_cov = std::max(eye_cov, coverage(d));
            }

            // Arc below the face center, opening downward (+y).
            const double qx = lx, qy = ly - s.mouth_cy;
            double phi = std::atan2(qx, qy);  // 0 points straight down
            phi = std::clamp(phi, -s.mouth_half_angle, s.mouth_half_angle);
            const double ax = s.mouth_r * std::sin(phi);
            const double ay = s.mouth_r * std::cos(phi);
            const double mouth_d = std::hypot(qx - ax, qy - ay) - 0.5 * s.mouth_thick;
            const double mouth_cov = coverage(mouth_d);

            for (int64_t c = 0; c < 3; ++c) {
                double val = bg * s.bg_tint[c];
                val += face_cov * (s.face_value * s.face_tint[c] - val);
                val += face_cov * eye_cov * (s.eye_value - val);
                val += face_cov * mouth_cov * (s.mouth_value - val);
                px[static_cast<size_t>((y * cfg.width + x) * 3 + c)] =
                    std::clamp(val, 0.02, 0.98);
            }
        }
    }
    return Tensor({cfg.height, cfg.width, 3}, std::move(px));
}

// Separable Gaussian blur, edge-clamped, radius 3 sigma.
Tensor gaussian_blur(const Tensor& frame, double sigma) {
    const int64_t h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
    const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int64_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        ksum += v;
    }
    for (double& v : k) v /= ksum;

    const auto src = frame.data();
    std::vector<double> tmp(src.begin(), src.end());
    std::vector<double> out(src.size());
    // Horizontal pass into tmp, vertical pass into out.
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int64_t i = -radius; i <= radius; ++i) {
                    const int64_t xx = std::clamp(x + i, int64_t{0}, w - 1);
                    acc += k[static_cast<size_t>(i + radius)] *
                           src[static_cast<size_t>((y * w + xx) * c + ch)];
                }
                tmp[static_cast<size_t>((y * w + x) * c + ch)] = acc;
            }
        }
    }
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int64_t i = -radius; i <= radius; ++i) {
                    const int64_t yy = std::clamp(y + i, int64_t{0}, h - 1);
                    acc += k[static_cast<size_t>(i + radius)] *
                           tmp[static_cast<size_t>((yy * w + x) * c + ch)];
                }
                out[static_cast<size_t>((y * w + x) * c + ch)] = acc;
            }
        }
    }
    return Tensor(frame.shape(), std::move(out));
}

// Bilinear resample with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& frame, int64_t oh, int64_t ow) {
    const int64_t h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
    const double sy = static_cast<double>(h) / static_cast<double>(oh);
    const double sx = static_cast<double>(w) / static_cast<double>(ow);
    const auto src = frame.data();
    std::vector<double> out(static_cast<size_t>(oh * ow * c));
    for (int64_t y = 0; y < oh; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(h - 1));
        const auto y0 = static_cast<int64_t>(std::floor(fy));
        const int64_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (int64_t x = 0; x < ow; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(w - 1));
            const auto x0 = static_cast<int64_t>(std::floor(fx));
            const int64_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (int64_t ch = 0; ch < c; ++ch) {
                const double v00 = src[static_cast<size_t>((y0 * w + x0) * c + ch)];
                const double v01 = src[static_cast<size_t>((y0 * w + x1) * c + ch)];
                const double v10 = src[static_cast<size_t>((y1 * w + x0) * c + ch)];
                const double v11 = src[static_cast<size_t>((y1 * w + x1) * c + ch)];
                const double top = v00 + wx * (v01 - v00);
                const double bot = v10 + wx * (v11 - v10);
                out[static_cast<size_t>((y * ow + x) * c + ch)] = top + wy * (bot - top);
            }
        }
    }
    return Tensor({oh, ow, c}, std::move(out));
}

}  // namespace

VideoSequence generate_toy_sequence(const ToyConfig& cfg, Rng& rng) {
    cfg.validate();
    const ToyScene scene = draw_scene(cfg, rng);
    VideoSequence v;
    v.fps = cfg.fps;
    v.frames.reserve(static_cast<size_t>(cfg.frames));
    for (int64_t t = 0; t < cfg.frames; ++t) v.frames.push_back(render_frame(scene, cfg, t));
    return v;
}

VideoSequence degrade_bfr(const VideoSequence& clean, const DegradeConfig& dc, Rng& rng) {
    clean.validate();
    dc.validate();

    // One draw per clip keeps the degradation temporally consistent.
    const double sigma = rng.uniform(dc.blur_sigma_min, dc.blur_sigma_max);
    const int64_t factor =
        dc.down_factors[static_cast<size_t>(rng.below(static_cast<int64_t>(dc.down_factors.size())))];
    const double noise_sigma = rng.uniform(dc.noise_sigma_min, dc.noise_sigma_max);
    const int64_t levels =
        dc.quant_levels[static_cast<size_t>(rng.below(static_cast<int64_t>(dc.quant_levels.size())))];

    const int64_t h = clean.height(), w = clean.width();
    const int64_t lh = std::max<int64_t>(1, h / factor);
    const int64_t lw = std::max<int64_t>(1, w / factor);

    VideoSequence out;
    out.fps = clean.fps;
    out.frames.reserve(clean.frames.size());
    for (const Tensor& frame : clean.frames) {
        Tensor f = sigma > 0.0 ? gaussian_blur(frame, sigma) : frame;
        if (factor > 1) f = resize_bilinear(f, lh, lw);
        std::vector<double> v(f.data().begin(), f.data().end());
        if (noise_sigma > 0.0) {
            for (double& p : v) p = clamp01(p + noise_sigma * rng.normal());
        }
        const double steps = static_cast<double>(levels - 1);
        for (double& p : v) p = std::round(clamp01(p) * steps) / steps;
        Tensor g(f.shape(), std::move(v));
        if (factor > 1) g = resize_bilinear(g, h, w);
        out.frames.push_back(std::move(g));
    }
    return out;
}

VideoSequence to_grayscale(const VideoSequence& v) {
    v.validate();
    if (v.channels() != 3) {
        throw ContractError("to_grayscale: expected 3 channels, got " +
                            std::to_string(v.channels()));
    }
    VideoSequence out;
    out.fps = v.fps;
    out.frames.reserve(v.frames.size());
    for (const Tensor& frame : v.frames) {
        const auto src = frame.data();
        std::vector<double> px(src.size());
        for (size_t i = 0; i < src.size(); i += 3) {
            const double luma = 0.299 * src[i] + 0.587 * src[i + 1] + 0.114 * src[i + 2];
            px[i] = px[i + 1] = px[i + 2] = luma;
        }
        out.frames.emplace_back(frame.shape(), std::move(px));
    }
    return out;
}

Tensor make_mask_brush(int64_t height, int64_t width, Rng& rng) {
    if (height <= 0 || width <= 0) throw ContractError("make_mask_brush: extents must be positive");
    const double total = static_cast<double>(height * width);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const int64_t vertices = 4 + rng.below(5);  // 4..8
        std::vector<double> xs(static_cast<size_t>(vertices)), ys(xs.size());
        for (size_t i = 0; i < xs.size(); ++i) {
            xs[i] = rng.uniform(0.0, static_cast<double>(width));
            ys[i] = rng.uniform(0.0, static_cast<double>(height));
        }
        const double thickness = rng.uniform(3.0, 9.0);
        const double half = 0.5 * thickness;

        std::vector<double> mask(static_cast<size_t>(height * width), 0.0);
        double on = 0.0;
        for (int64_t y = 0; y < height; ++y) {
            for (int64_t x = 0; x < width; ++x) {
                const double px = static_cast<double>(x) + 0.5;
                const double py = static_cast<double>(y) + 0.5;
                bool hit = false;
                for (size_t i = 0; i + 1 < xs.size() && !hit; ++i) {
                    const double ax = xs[i], ay = ys[i];
                    const double bx = xs[i + 1], by = ys[i + 1];
                    const double abx = bx - ax, aby = by - ay;
                    const double len2 = abx * abx + aby * aby;
                    double t = len2 > 0.0 ? ((px - ax) * abx + (py - ay) * aby) / len2 : 0.0;
                    t = std::clamp(t, 0.0, 1.0);
                    const double dx = px - (ax + t * abx), dy = py - (ay + t * aby);
                    hit = dx * dx + dy * dy <= half * half;
                }
                if (hit) {
                    mask[static_cast<size_t>(y * width + x)] = 1.0;
                    on += 1.0;
                }
            }
        }
        const double cover = on / total;
        if (cover >= 0.05 && cover <= 0.40) return Tensor({height, width}, std::move(mask));
    }
    throw NumericError("make_mask_brush: could not hit the coverage band");
}

}  // namespace data
}  // namespace dirlatent
