#include <jdbpr/channel.hpp>

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jdbpr {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Eigen::VectorXcd array_response(int n, double spacing_ratio, double angle) {
    if (n < 0)
        throw std::invalid_argument("array_response: negative element count");
    Eigen::VectorXcd a(n);
    const double step = -kTwoPi * spacing_ratio * std::sin(angle);
    for (int i = 0; i < n; ++i)
        a[i] = std::polar(1.0, step * i);
    return a;
}

double path_gain(double c0, double d, double alpha) {
    if (!(c0 > 0.0))
        throw std::invalid_argument("path_gain: reference gain must be positive");
    if (!(d > 0.0))
        throw std::invalid_argument("path_gain: distance must be positive");
    return std::sqrt(c0 * std::pow(d, -alpha));
}

double azimuth(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::atan2(b.y() - a.y(), b.x() - a.x());
}

Eigen::MatrixXcd rician_mix(const Eigen::MatrixXcd& los, double k_factor, Rng& rng) {
    if (!(k_factor >= 0.0))
        throw std::invalid_argument("rician_mix: negative Rician factor");
    const double a = std::sqrt(k_factor / (1.0 + k_factor));
    const double b = std::sqrt(1.0 / (1.0 + k_factor));
    Eigen::MatrixXcd out(los.rows(), los.cols());
    for (Eigen::Index r = 0; r < los.rows(); ++r)
        for (Eigen::Index c = 0; c < los.cols(); ++c)
            out(r, c) = a * los(r, c) + b * rng.cgaussian();
    return out;
}

Topology draw_topology(const SystemConfig& cfg, std::uint64_t draw) {
    if (cfg.num_users < 1)
        throw std::invalid_argument("draw_topology: need at least one user");
    if (!(cfg.user_radius > 0.0))
        throw std::invalid_argument("draw_topology: user radius must be positive");
    Topology t;
    t.bs = cfg.bs_position;
    t.irs = cfg.irs_position;
    Rng rng(substream_seed(cfg.rng_seed, "topology", draw));
    t.users.reserve(static_cast<std::size_t>(cfg.num_users));
    for (int k = 0; k < cfg.num_users; ++k) {
        const double r = cfg.user_radius * std::sqrt(rng.uniform());
        const double phi = kTwoPi * rng.uniform();
        t.users.emplace_back(r * std::cos(phi), r * std::sin(phi), 0.0);
    }
    return t;
}

ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t draw) {
    return generate_channels(cfg, draw_topology(cfg, draw), draw);
}

ChannelSet generate_channels(const SystemConfig& cfg, const Topology& topo, std::uint64_t draw) {
    const int K = cfg.num_users, N = cfg.num_antennas, M = cfg.num_elements;
    if (N < 1)
        throw std::invalid_argument("generate_channels: need at least one antenna");
    if (M < 0)
        throw std::invalid_argument("generate_channels: negative element count");
    if (static_cast<int>(topo.users.size()) != K)
        throw std::invalid_argument("generate_channels: topology user count mismatch");

    ChannelSet ch;
    ch.num_users = K;
    ch.num_antennas = N;
    ch.num_elements = M;
    ch.topology = topo;
    ch.seed = cfg.rng_seed;

    // Direct BS-user links: Rayleigh with distance-law scaling.
    ch.h_d.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const double d = (topo.users[static_cast<std::size_t>(k)] - topo.bs).norm();
        const double amp = path_gain(cfg.path_loss_ref, d, cfg.alpha_direct);
        Rng rng(substream_seed(cfg.rng_seed, "h_d", draw, static_cast<std::uint64_t>(k)));
        Eigen::VectorXcd g(N);
        for (int n = 0; n < N; ++n)
            g[n] = rng.cgaussian();
        ch.h_d[static_cast<std::size_t>(k)] = amp * g;
    }

    ch.h_r.resize(static_cast<std::size_t>(K));
    if (M == 0) {
        ch.G.resize(0, N);
        for (auto& v : ch.h_r)
            v.resize(0);
        return ch;
    }

    // BS-IRS link: Rician around the rank-one ULA outer product
    // conj(a_M(theta_AoA)) * a_N(theta_AoD)^T, drawn row by row so that a
    // larger surface extends a smaller one.
    const double d_bi = (topo.irs - topo.bs).norm();
    const double amp_g = path_gain(cfg.path_loss_ref, d_bi, cfg.alpha_bs_irs);
    const Eigen::VectorXcd a_m =
        array_response(M, cfg.element_spacing_ratio, azimuth(topo.irs, topo.bs));
    const Eigen::VectorXcd a_n =
        array_response(N, cfg.element_spacing_ratio, azimuth(topo.bs, topo.irs));
    const double wl = std::sqrt(cfg.rician_kappa / (1.0 + cfg.rician_kappa));
    const double wn = std::sqrt(1.0 / (1.0 + cfg.rician_kappa));
    ch.G.resize(M, N);
    for (int m = 0; m < M; ++m) {
        Rng rng(substream_seed(cfg.rng_seed, "G", draw, static_cast<std::uint64_t>(m)));
        for (int n = 0; n < N; ++n)
            ch.G(m, n) = amp_g * (wl * std::conj(a_m[m]) * a_n[n] + wn * rng.cgaussian());
    }

    // IRS-user links: Rician around the departure steering vector.
    const double vl = std::sqrt(cfg.rician_vartheta / (1.0 + cfg.rician_vartheta));
    const double vn = std::sqrt(1.0 / (1.0 + cfg.rician_vartheta));
    for (int k = 0; k < K; ++k) {
        const auto& pos = topo.users[static_cast<std::size_t>(k)];
        const double d = (pos - topo.irs).norm();
        const double amp = path_gain(cfg.path_loss_ref, d, cfg.alpha_irs_user);
        const Eigen::VectorXcd los =
            array_response(M, cfg.element_spacing_ratio, azimuth(topo.irs, pos));
        Rng rng(substream_seed(cfg.rng_seed, "h_r", draw, static_cast<std::uint64_t>(k)));
        Eigen::VectorXcd v(M);
        for (int m = 0; m < M; ++m)
            v[m] = amp * (vl * los[m] + vn * rng.cgaussian());
        ch.h_r[static_cast<std::size_t>(k)] = v;
    }
    return ch;
}

ChannelSet without_irs(const ChannelSet& ch) {
    ChannelSet out = ch;
    out.num_elements = 0;
    out.G.resize(0, ch.num_antennas);
    for (auto& v : out.h_r)
        v.resize(0);
    return out;
}

namespace {

void put_complex(std::ostream& os, const cxd& z) {
    os << z.real() << ' ' << z.imag() << '\n';
}

cxd get_complex(std::istream& is) {
    double re = 0.0, im = 0.0;
    if (!(is >> re >> im))
        throw std::runtime_error("load_channels: truncated complex entry");
    return {re, im};
}

} // namespace

void dump_channels(std::ostream& os, const ChannelSet& ch) {
    os << std::setprecision(17);
    os << "jdbpr-channels v1\n";
    os << "K " << ch.num_users << "\nN " << ch.num_antennas << "\nM " << ch.num_elements
       << "\nseed " << ch.seed << '\n';
    auto put_vec3 = [&](const char* tag, const Eigen::Vector3d& v) {
        os << tag << ' ' << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    };
    put_vec3("bs", ch.topology.bs);
    put_vec3("irs", ch.topology.irs);
    for (const auto& u : ch.topology.users)
        put_vec3("user", u);
    os << "G\n";
    for (Eigen::Index m = 0; m < ch.G.rows(); ++m)
        for (Eigen::Index n = 0; n < ch.G.cols(); ++n)
            put_complex(os, ch.G(m, n));
    for (int k = 0; k < ch.num_users; ++k) {
        os << "h_r " << k << '\n';
        for (Eigen::Index m = 0; m < ch.h_r[static_cast<std::size_t>(k)].size(); ++m)
            put_complex(os, ch.h_r[static_cast<std::size_t>(k)][m]);
    }
    for (int k = 0; k < ch.num_users; ++k) {
        os << "h_d " << k << '\n';
        for (Eigen::Index n = 0; n < ch.h_d[static_cast<std::size_t>(k)].size(); ++n)
            put_complex(os, ch.h_d[static_cast<std::size_t>(k)][n]);
    }
    os << "end\n";
}

ChannelSet load_channels(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "jdbpr-channels v1")
        throw std::runtime_error("load_channels: bad header");
    ChannelSet ch;
    std::string tag;
    auto expect = [&](const char* want) {
        if (!(is >> tag) || tag != want)
            throw std::runtime_error(std::string("load_channels: expected ") + want);
    };
    expect("K");
    is >> ch.num_users;
    expect("N");
    is >> ch.num_antennas;
    expect("M");
    is >> ch.num_elements;
    expect("seed");
    is >> ch.seed;
    auto get_vec3 = [&](const char* want) {
        expect(want);
        Eigen::Vector3d v;
        if (!(is >> v.x() >> v.y() >> v.z()))
            throw std::runtime_error("load_channels: truncated position");
        return v;
    };
    ch.topology.bs = get_vec3("bs");
    ch.topology.irs = get_vec3("irs");
    ch.topology.users.resize(static_cast<std::size_t>(ch.num_users));
    for (auto& u : ch.topology.users)
        u = get_vec3("user");
    expect("G");
    ch.G.resize(ch.num_elements, ch.num_antennas);
    for (Eigen::Index m = 0; m < ch.G.rows(); ++m)
        for (Eigen::Index n = 0; n < ch.G.cols(); ++n)
            ch.G(m, n) = get_complex(is);
    ch.h_r.resize(static_cast<std::size_t>(ch.num_users));
    for (int k = 0; k < ch.num_users; ++k) {
        expect("h_r");
        int idx = -1;
        is >> idx;
        auto& v = ch.h_r[static_cast<std::size_t>(k)];
        v.resize(ch.num_elements);
        for (Eigen::Index m = 0; m < v.size(); ++m)
            v[m] = get_complex(is);
    }
    ch.h_d.resize(static_cast<std::size_t>(ch.num_users));
    for (int k = 0; k < ch.num_users; ++k) {
        expect("h_d");
        int idx = -1;
        is >> idx;
        auto& v = ch.h_d[static_cast<std::size_t>(k)];
        v.resize(ch.num_antennas);
        for (Eigen::Index n = 0; n < v.size(); ++n)
            v[n] = get_complex(is);
    }
    expect("end");
    return ch;
}

} // namespace jdbpr
