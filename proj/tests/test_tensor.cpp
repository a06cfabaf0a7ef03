#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "uscnn/tensor.hpp"

using namespace uscnn;
using testutil::random_tensor;
using testutil::rel_error;

namespace {

// Quadruple-loop cross-correlation oracle in 64-bit, written directly from
// the definition: out(oc,oy,ox) = bias + sum over (ic,ky,kx) of
// w(oc,ic,ky,kx) * in(ic, oy*s+ky-p, ox*s+kx-p), zero outside the input.
std::vector<double> conv_oracle(const Tensor& input, const ConvLayer& layer) {
    const int cin = input.extent(0), h = input.extent(1), w = input.extent(2);
    const int cout = layer.out_channels(), k = layer.kernel();
    const int s = layer.stride, p = layer.padding;
    const int hout = (h + 2 * p - k) / s + 1;
    const int wout = (w + 2 * p - k) / s + 1;
    std::vector<double> out(static_cast<std::size_t>(cout) * hout * wout);
    for (int oc = 0; oc < cout; ++oc) {
        for (int oy = 0; oy < hout; ++oy) {
            for (int ox = 0; ox < wout; ++ox) {
                double acc = layer.bias.at(oc);
                for (int ic = 0; ic < cin; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * s + ky - p;
                            const int ix = ox * s + kx - p;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += double(layer.weights.at(oc, ic, ky, kx)) * input.at(ic, iy, ix);
                        }
                    }
                }
                if (layer.has_activation && acc < 0.0) acc *= kLeakySlope;
                out[(static_cast<std::size_t>(oc) * hout + oy) * wout + ox] = acc;
            }
        }
    }
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        acc += double(a.data[i]) * b.data[i];
    }
    return acc;
}

}  // namespace

TEST_CASE("tensor shape validation") {
    CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, -1}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
}

TEST_CASE("conv2d identity kernel") {
    Tensor input({1, 3, 3}, std::vector<float>(9, 1.0f));
    ConvLayer layer(1, 1, 1, 1, false);
    layer.weights.at(0, 0, 0, 0) = 1.0f;
    const Tensor out = conv2d_forward(input, layer);
    REQUIRE(out.shape == std::vector<int>{1, 3, 3});
    for (float v : out.data) CHECK(v == 1.0f);
}

TEST_CASE("conv2d averaging kernel center element") {
    Tensor input({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    ConvLayer layer(1, 1, 3, 1, false);
    for (float& w : layer.weights.data) w = 1.0f / 9.0f;
    const Tensor out = conv2d_forward(input, layer);
    CHECK(out.at(0, 1, 1) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("conv2d matches the quadruple-loop oracle") {
    RandomSource rand(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int stride = (trial % 2) + 1;
        const bool act = trial % 3 != 0;
        Tensor input = random_tensor({2, 8, 8}, rand);
        ConvLayer layer(4, 2, 3, stride, act);
        layer.weights = random_tensor(layer.weights.shape, rand);
        layer.bias = random_tensor(layer.bias.shape, rand);
        const Tensor out = conv2d_forward(input, layer);
        const std::vector<double> expect = conv_oracle(input, layer);
        REQUIRE(out.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(rel_error(out.data[i], expect[i], 1e-9) < 1e-6);
        }
    }
}

TEST_CASE("conv2d rejects channel mismatch") {
    Tensor input({3, 8, 8});
    ConvLayer layer(4, 2, 3, 1, true);
    CHECK_THROWS_AS(conv2d_forward(input, layer), ShapeError);
}

TEST_CASE("conv2d_backward zero grad gives zero gradients") {
    RandomSource rand(3);
    Tensor input = random_tensor({2, 5, 5}, rand);
    ConvLayer layer(3, 2, 3, 1, true);
    layer.weights = random_tensor(layer.weights.shape, rand);
    const Tensor gout({3, 5, 5});
    const ConvGrads g = conv2d_backward(input, layer, gout);
    for (float v : g.input.data) CHECK(v == 0.0f);
    for (float v : g.weights.data) CHECK(v == 0.0f);
    for (float v : g.bias.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d_backward scalar chain rule") {
    Tensor input({1, 1, 1}, {3.0f});
    ConvLayer layer(1, 1, 1, 1, false);
    layer.weights.at(0, 0, 0, 0) = 2.0f;
    Tensor gout({1, 1, 1}, {1.0f});
    const ConvGrads g = conv2d_backward(input, layer, gout);
    CHECK(g.weights.data[0] == 3.0f);
    CHECK(g.input.data[0] == 2.0f);
    CHECK(g.bias.data[0] == 1.0f);
}

TEST_CASE("conv2d_backward matches central finite differences") {
    RandomSource rand(7);
    Tensor input = random_tensor({1, 6, 6}, rand);
    ConvLayer layer(2, 1, 3, 1, true);
    layer.weights = random_tensor(layer.weights.shape, rand);
    layer.bias = random_tensor(layer.bias.shape, rand, -0.1, 0.1);

    // Scalar loss: dot of the output with a fixed random field.
    Tensor probe;
    {
        const Tensor out = conv2d_forward(input, layer);
        probe = random_tensor(out.shape, rand);
    }
    auto loss = [&](const Tensor& in, const ConvLayer& l) {
        const Tensor out = conv2d_forward(in, l);
        return dot(out, probe);
    };
    const ConvGrads g = conv2d_backward(input, layer, probe);

    const double h = 1e-3;
    auto fd_check = [&](Tensor& target, const Tensor& analytic) {
        for (std::size_t i = 0; i < target.data.size(); ++i) {
            const float saved = target.data[i];
            target.data[i] = static_cast<float>(saved + h);
            const double plus = loss(input, layer);
            target.data[i] = static_cast<float>(saved - h);
            const double minus = loss(input, layer);
            target.data[i] = saved;
            const double fd = (plus - minus) / (2.0 * h);
            CHECK(rel_error(analytic.data[i], fd, 1e-4) < 1e-4);
        }
    };
    fd_check(layer.weights, g.weights);
    fd_check(layer.bias, g.bias);
    fd_check(input, g.input);
}

TEST_CASE("conv2d_backward rejects wrong grad shape") {
    Tensor input({1, 6, 6});
    ConvLayer layer(2, 1, 3, 2, true);
    Tensor bad({2, 6, 6});
    CHECK_THROWS_AS(conv2d_backward(input, layer, bad), ShapeError);
}

TEST_CASE("upsample_repeat definitions") {
    SUBCASE("factor 1 is identity") {
        RandomSource rand(5);
        const Tensor t = random_tensor({2, 3, 4}, rand);
        const Tensor u = upsample_repeat(t, 1);
        CHECK(u.shape == t.shape);
        CHECK(u.data == t.data);
    }
    SUBCASE("constant replication") {
        Tensor t({1, 1, 1}, {5.0f});
        const Tensor u = upsample_repeat(t, 2);
        REQUIRE(u.shape == std::vector<int>{1, 2, 2});
        for (float v : u.data) CHECK(v == 5.0f);
    }
    SUBCASE("2x2 unrolled") {
        Tensor t({1, 2, 2}, {1, 2, 3, 4});
        const Tensor u = upsample_repeat(t, 2);
        const std::vector<float> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
        CHECK(u.data == expect);
    }
}

TEST_CASE("upsample_repeat_backward") {
    SUBCASE("factor 1 passthrough") {
        RandomSource rand(9);
        const Tensor g = random_tensor({1, 2, 2}, rand);
        CHECK(upsample_repeat_backward(g, 1).data == g.data);
    }
    SUBCASE("sums the copies") {
        Tensor g({1, 2, 2}, {1, 1, 1, 1});
        const Tensor r = upsample_repeat_backward(g, 2);
        REQUIRE(r.shape == std::vector<int>{1, 1, 1});
        CHECK(r.data[0] == 4.0f);
    }
    SUBCASE("rejects non-divisible extents") {
        Tensor g({1, 3, 4});
        CHECK_THROWS_AS(upsample_repeat_backward(g, 2), ShapeError);
    }
    SUBCASE("adjoint identity on random tensors") {
        RandomSource rand(13);
        for (int trial = 0; trial < 10; ++trial) {
            const Tensor x = random_tensor({2, 3, 5}, rand);
            const Tensor g = random_tensor({2, 6, 10}, rand);
            const double lhs = dot(g, upsample_repeat(x, 2));
            const double rhs = dot(upsample_repeat_backward(g, 2), x);
            CHECK(rel_error(lhs, rhs, 1e-9) < 1e-6);
        }
    }
}

TEST_CASE("adjointness of conv2d via dot products") {
    // dot(g, conv(x)) == dot(conv_backward_input(g), x) + bias term, for the
    // linear (no activation) case.
    RandomSource rand(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int stride = (trial % 2) + 1;
        Tensor x = random_tensor({2, 6, 6}, rand);
        ConvLayer layer(3, 2, 3, stride, false);
        layer.weights = random_tensor(layer.weights.shape, rand);
        layer.bias = random_tensor(layer.bias.shape, rand);
        const Tensor y = conv2d_forward(x, layer);
        const Tensor g = random_tensor(y.shape, rand);
        const ConvGrads grads = conv2d_backward(x, layer, g);

        double bias_term = 0.0;
        for (int oc = 0; oc < layer.out_channels(); ++oc) {
            bias_term += double(layer.bias.at(oc)) * grads.bias.at(oc) / 1.0;
        }
        // dot(g, y) = dot(P*(g), x) + sum_oc bias_oc * sum(g_oc)
        double bias_contrib = 0.0;
        const int hout = y.extent(1), wout = y.extent(2);
        for (int oc = 0; oc < y.extent(0); ++oc) {
            double s = 0.0;
            for (int i = 0; i < hout * wout; ++i) {
                s += g.data[static_cast<std::size_t>(oc) * hout * wout + i];
            }
            bias_contrib += double(layer.bias.at(oc)) * s;
        }
        const double lhs = dot(g, y);
        const double rhs = dot(grads.input, x) + bias_contrib;
        CHECK(rel_error(lhs, rhs, 1e-6) < 1e-5);
    }
}

TEST_CASE("adam_step hand-evaluated recurrence") {
    SUBCASE("zero gradient leaves the parameter unchanged") {
        Tensor p({1}, {0.7f});
        Tensor g({1}, {0.0f});
        AdamState s({1});
        adam_step(p, g, s);
        CHECK(p.data[0] == 0.7f);
        CHECK(s.step_count == 1);
    }
    SUBCASE("first step moves by about the learning rate") {
        Tensor p({1}, {0.0f});
        Tensor g({1}, {1.0f});
        AdamState s({1});
        s.set_hyperparams(0.1, 0.9, 0.999, 1e-8);
        adam_step(p, g, s);
        // m=0.1, v=0.001; bias-corrected both become 1; update = lr/(1+eps).
        CHECK(p.data[0] == doctest::Approx(-0.1).epsilon(1e-6));
    }
    SUBCASE("constant gradient decreases the parameter monotonically") {
        Tensor p({1}, {1.0f});
        Tensor g({1}, {0.5f});
        AdamState s({1});
        s.set_hyperparams(0.01, 0.9, 0.999, 1e-8);
        float prev = p.data[0];
        double last_update = 0.0;
        for (int i = 0; i < 200; ++i) {
            adam_step(p, g, s);
            CHECK(p.data[0] < prev);
            last_update = double(prev) - p.data[0];
            prev = p.data[0];
        }
        // With saturated moments the bias-corrected step tends to lr.
        CHECK(last_update == doctest::Approx(0.01).epsilon(0.05));
    }
    SUBCASE("shape mismatch rejected") {
        Tensor p({2});
        Tensor g({3});
        AdamState s({2});
        CHECK_THROWS_AS(adam_step(p, g, s), ShapeError);
    }
}
