#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "doctest.h"
#include "finn/autodiff/tape.hpp"
#include "finn/error.hpp"
#include "finn/model/checkpoint.hpp"
#include "finn/model/mlp.hpp"
#include "finn/model/mlp_batch.hpp"

using namespace finn;
namespace fs = std::filesystem;

namespace {

// Initialised weights plus random biases, so no layer is trivially centred.
MlpParams random_params(std::uint64_t seed) {
    MlpParams p = init_params(seed);
    std::mt19937_64 gen(seed + 1000);
    std::normal_distribution<double> n(0.0, 0.3);
    for (int i = 0; i < MlpParams::kHidden; ++i) {
        p.b1()[i] = n(gen);
        p.b2()[i] = n(gen);
    }
    p.b3() = n(gen);
    return p;
}

double g_at(const MlpParams& p, double m, double tau) { return forward_jet(p, {m, tau}).value; }

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("finn_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST_CASE("init is a pure function of the seed") {
    const MlpParams a = init_params(4), b = init_params(4), c = init_params(5);
    CHECK(a == b);
    CHECK(a.values()[0] != c.values()[0]);
    const double lim1 = std::sqrt(3.0 / 2.0);
    for (int i = 0; i < 100; ++i) CHECK(std::abs(a.values()[MlpParams::kW1 + i]) <= lim1);
    for (int i = 0; i < MlpParams::kHidden; ++i) CHECK(a.b1()[i] == 0.0);
    for (double m = 0.75; m <= 1.25; m += 0.01) {
        const double g = g_at(a, m, 0.3);
        CHECK(std::isfinite(g));
        CHECK(g > 0.0);
    }
}

TEST_CASE("zero head gives softplus(0)") {
    MlpParams p = random_params(2);
    p.w3().setZero();
    p.b3() = 0.0;
    const ad::Jet2 j = forward_jet(p, {1.05, 0.3});
    CHECK(j.value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(j.d1 == 0.0);
    CHECK(j.d2 == 0.0);
}

TEST_CASE("jets match finite differences on 100 random draws") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> um(0.75, 1.35), ut(0.01, 0.5);
    int checked = 0;
    for (int draw = 0; draw < 100; ++draw) {
        const MlpParams p = random_params(100 + static_cast<std::uint64_t>(draw));
        const double m = um(gen), tau = ut(gen);
        const ad::Jet2 j = forward_jet(p, {m, tau});
        // Fourth-order central stencils.
        const double h = 1e-3;
        const double f2p = g_at(p, m + 2 * h, tau), f1p = g_at(p, m + h, tau);
        const double f1m = g_at(p, m - h, tau), f2m = g_at(p, m - 2 * h, tau);
        const double fd1 = (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h);
        const double fd2 = (-f2p + 16 * f1p - 30 * j.value + 16 * f1m - f2m) / (12 * h * h);
        CHECK(j.d1 == doctest::Approx(fd1).epsilon(1e-6).scale(1e-3));
        CHECK(j.d2 == doctest::Approx(fd2).epsilon(1e-4).scale(1e-1));
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("price and greeks: homogeneity and self-consistency") {
    const MlpParams p = random_params(7);
    const OptionSpec o{100.0, 0.3, 0.0, OptionKind::call};
    const OptionSpec o2{200.0, 0.3, 0.0, OptionKind::call};
    const PriceGreeks a = price_delta_gamma(p, 104.0, o);
    const PriceGreeks b = price_delta_gamma(p, 208.0, o2);
    CHECK(b.price == doctest::Approx(2.0 * a.price).epsilon(1e-14));
    CHECK(b.delta == doctest::Approx(a.delta).epsilon(1e-14));
    CHECK(b.gamma == doctest::Approx(0.5 * a.gamma).epsilon(1e-14));

    const OptionSpec r{100.0, 0.3, 0.04, OptionKind::call};
    const PriceGreeks c = price_delta_gamma(p, 104.0, r);
    const double h = 1e-2;
    const double up = price_delta_gamma(p, 104.0 + h, r).price;
    const double dn = price_delta_gamma(p, 104.0 - h, r).price;
    CHECK(c.delta == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
    CHECK(c.gamma == doctest::Approx((up - 2 * c.price + dn) / (h * h)).epsilon(1e-4));

    CHECK_THROWS_AS(price_delta_gamma(p, 100.0, {100.0, 0.0, 0.0, OptionKind::call}), DomainError);
    CHECK_THROWS_AS(price_delta_gamma(p, -1.0, o), DomainError);
}

TEST_CASE("clamp") {
    const ClampedGreeks a = clamp_greeks(1.2, 0.05, OptionKind::call);
    CHECK(a.delta == 1.0);
    CHECK(a.gamma == 0.05);
    CHECK(a.delta_clipped);
    CHECK_FALSE(a.gamma_clipped);
    const ClampedGreeks b = clamp_greeks(-0.3, 0.02, OptionKind::put);
    CHECK(b.delta == -0.3);
    CHECK(b.gamma == 0.02);
    CHECK_FALSE(b.delta_clipped);
    const ClampedGreeks c = clamp_greeks(0.5, -0.01, OptionKind::call);
    CHECK(c.delta == 0.5);
    CHECK(c.gamma == 0.0);
    CHECK(c.gamma_clipped);
    CHECK(clamp_greeks(-0.1, 0.0, OptionKind::call).delta == 0.0);
    CHECK(clamp_greeks(0.2, 0.0, OptionKind::put).delta == 0.0);
    CHECK(clamp_greeks(0.5, 3.0, OptionKind::call).gamma == 1.0);
}

TEST_CASE("tape recording equals the jet evaluation") {
    const MlpParams p = random_params(12);
    ad::Tape t;
    const auto vars = register_parameters(t, p);
    const ad::Var out = record_forward(vars, t.seed(1.07), t.constant(0.33));
    const ad::Jet2 j = forward_jet(p, {1.07, 0.33});
    CHECK(out.jet().value == doctest::Approx(j.value).epsilon(1e-14));
    CHECK(out.jet().d1 == doctest::Approx(j.d1).epsilon(1e-13));
    CHECK(out.jet().d2 == doctest::Approx(j.d2).epsilon(1e-12));
}

TEST_CASE("batched network matches the tape, values and gradients") {
    const MlpParams p = random_params(31);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> um(0.8, 1.3), ut(0.01, 0.48), ua(-1.0, 1.0);
    const int n = 37;
    std::vector<double> m(n), tau(n);
    Eigen::ArrayXd av(n), a1(n), a2(n);
    for (int i = 0; i < n; ++i) {
        m[i] = um(gen);
        tau[i] = ut(gen);
        av[i] = ua(gen);
        a1[i] = ua(gen);
        a2[i] = ua(gen);
    }
    MlpBatch batch;
    batch.forward(p, m, tau, true);
    std::vector<double> grad(MlpParams::kCount, 0.0);
    batch.backward(p, av, a1, a2, grad);

    ad::Tape t;
    const auto vars = register_parameters(t, p);
    ad::Var loss = t.constant(0.0);
    for (int i = 0; i < n; ++i) {
        const ad::Var g = record_forward(vars, t.seed(m[i]), t.constant(tau[i]));
        CHECK(batch.value()[i] == doctest::Approx(g.jet().value).epsilon(1e-12));
        CHECK(batch.d1()[i] == doctest::Approx(g.jet().d1).epsilon(1e-11));
        CHECK(batch.d2()[i] == doctest::Approx(g.jet().d2).epsilon(1e-10).scale(1e-6));
        loss = loss + av[i] * g + a1[i] * ad::d1_of(g) + a2[i] * ad::d2_of(g);
    }
    const auto ref = t.grad_params(loss);
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        worst = std::max(worst, std::abs(grad[k] - ref[k]));
        scale = std::max(scale, std::abs(ref[k]));
    }
    CHECK(worst <= 1e-10 * scale);

    // A value-only pass must agree with the value channel of the jet pass.
    MlpBatch plain;
    plain.forward(p, m, tau, false);
    CHECK_FALSE(plain.has_jets());
    for (int i = 0; i < n; ++i) CHECK(plain.value()[i] == batch.value()[i]);
}

TEST_CASE("checkpoint round trip and corruption") {
    MlpParams p = random_params(9);
    p.meta = {9, 37, "heston", "delta_gamma", OptionKind::put};
    const fs::path f = temp_file("ckpt");
    save_checkpoint(p, f);
    const MlpParams q = load_checkpoint(f);
    CHECK(q == p);

    std::vector<char> bytes;
    {
        std::ifstream in(f, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::vector<char>& b) {
        std::ofstream out(f, std::ios::binary | std::ios::trunc);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };
    auto message = [&]() -> std::string {
        try {
            load_checkpoint(f);
        } catch (const FormatError& e) {
            return e.what();
        }
        return "";
    };

    std::vector<char> cut(bytes.begin(), bytes.end() - 20);
    write(cut);
    CHECK(message().find("truncated") != std::string::npos);

    std::vector<char> versioned = bytes;
    versioned[8] = 2;
    write(versioned);
    CHECK(message().find("version") != std::string::npos);

    std::vector<char> longer = bytes;
    longer.push_back(0);
    write(longer);
    CHECK(message().find("trailing") != std::string::npos);

    std::vector<char> bad = bytes;
    bad[0] = 'X';
    write(bad);
    CHECK(message().find("magic") != std::string::npos);

    fs::remove(f);
    CHECK_THROWS_AS(load_checkpoint(f), FormatError);
}
