#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "thinkgrid/numerics/adam.hpp"
#include "thinkgrid/numerics/autodiff.hpp"
#include "thinkgrid/numerics/checkpoint.hpp"
#include "thinkgrid/numerics/grad_check.hpp"
#include "thinkgrid/numerics/lstm.hpp"
#include "thinkgrid/numerics/residual.hpp"
#include "thinkgrid/rng.hpp"

using namespace thinkgrid;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor<double> random_tensor(Shape shape, RngStream& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.next_gaussian() * scale;
    return t;
}

} // namespace

TEST_CASE("tensor shape whispers", "[tensor]") {
    Tensor<float> t(Shape{2, 3});
    REQUIRE(t.numel() == 6);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 3);
    REQUIRE_THROWS_AS(Tensor<float>(Shape{2, 3}, std::vector<float>(5)), ShapeError);
}

TEST_CASE("rng streams are reproducible and keyed", "[rng]") {
    RngStream a(derive_stream(7, "env"));
    RngStream b(derive_stream(7, "env"));
    RngStream c(derive_stream(7, "agent"));
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
        all_equal = all_equal && (x == y);
        any_diff = any_diff || (x != z);
    }
    REQUIRE(all_equal);
    REQUIRE(any_diff);

    RngStream u(123);
    for (int i = 0; i < 1000; ++i) {
        const double d = u.next_double();
        REQUIRE(d >= 0.0);
        REQUIRE(d < 1.0);
        REQUIRE(u.next_below(5) < 5);
    }
}

TEST_CASE("basic op forward values", "[autodiff]") {
    auto a = make_param(Tensor<double>(Shape{2}, {1.0, -2.0}));
    auto b = make_param(Tensor<double>(Shape{2}, {3.0, 5.0}));
    REQUIRE(add(a, b)->value[0] == 4.0);
    REQUIRE(sub(a, b)->value[1] == -7.0);
    REQUIRE(mul(a, b)->value[1] == -10.0);
    REQUIRE(scale(a, 2.0)->value[0] == 2.0);
    REQUIRE(relu(a)->value[1] == 0.0);
}

TEST_CASE("grad_check on x squared at 3", "[grad_check]") {
    auto x = make_param(Tensor<double>::scalar(3.0));
    auto fn = [&] { return mul(x, x); };
    zero_grads<double>({x});
    auto loss = fn();
    backward(loss);
    REQUIRE(x->grad[0] == Catch::Approx(6.0).epsilon(1e-12));
    auto rep = grad_check<double>(fn, {x});
    REQUIRE(rep.deterministic);
    REQUIRE(rep.max_relative_error < 1e-6);
}

TEST_CASE("grad_check flags non-deterministic functions", "[grad_check]") {
    auto x = make_param(Tensor<double>::scalar(1.0));
    int calls = 0;
    auto fn = [&] {
        ++calls;
        return scale(x, 1.0 + 0.001 * calls);
    };
    auto rep = grad_check<double>(fn, {x});
    REQUIRE_FALSE(rep.deterministic);
}

TEST_CASE("every differentiable op passes randomized grad checks", "[autodiff][properties]") {
    RngStream rng(derive_stream(2024, "opcheck"));
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t B = 1 + static_cast<std::int64_t>(rng.next_below(3));
        const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_below(4));
        const std::int64_t m = 2 + static_cast<std::int64_t>(rng.next_below(4));

        auto x = make_param(random_tensor(Shape{B, n}, rng));
        auto y = make_param(random_tensor(Shape{B, n}, rng));
        auto w = make_param(random_tensor(Shape{m, n}, rng));
        auto bias = make_param(random_tensor(Shape{m}, rng));
        auto wide = make_param(random_tensor(Shape{n, m}, rng));

        std::vector<std::int32_t> idx;
        std::vector<double> weights;
        for (std::int64_t r = 0; r < B; ++r) {
            idx.push_back(static_cast<std::int32_t>(rng.next_below(static_cast<std::uint32_t>(n))));
            weights.push_back(rng.next_gaussian());
        }
        Tensor<double> target = random_tensor(Shape{B, m}, rng);

        struct Case {
            const char* name;
            std::function<Var<double>()> fn;
        };
        const std::vector<Case> cases = {
            {"add", [&] { return sum_all(add(x, y)); }},
            {"sub", [&] { return sum_all(mul(sub(x, y), x)); }},
            {"mul", [&] { return sum_all(mul(x, y)); }},
            {"scale", [&] { return sum_all(scale(x, 1.7)); }},
            {"sigmoid", [&] { return sum_all(sigmoid(x)); }},
            {"tanh", [&] { return sum_all(tanh_op(x)); }},
            {"relu", [&] { return sum_all(relu(x)); }},
            {"matmul", [&] { return sum_all(matmul(x, wide)); }},
            {"affine", [&] { return mse_against(affine(x, w, bias), target); }},
            {"concat_slice",
             [&] {
                 auto c = concat_cols<double>({x, y});
                 return sum_all(mul(slice_cols(c, 1, n + 1), slice_cols(c, n - 1, 2 * n - 1)));
             }},
            {"mean", [&] { return mean_all(sigmoid(x)); }},
            {"log_softmax",
             [&] { return weighted_gather_sum(log_softmax_rows(x), idx, weights); }},
            {"cross_entropy", [&] { return cross_entropy_rows(affine(x, w, bias),
                                                              std::vector<std::int32_t>(B, 0)); }},
            {"entropy", [&] { return mean_entropy_rows(affine(x, w, bias)); }},
        };
        for (const auto& c : cases) {
            auto rep = grad_check<double>(c.fn, {x, y, w, bias, wide});
            INFO("op " << c.name << " trial " << trial << " worst param " << rep.worst_param
                       << " analytic " << rep.worst_analytic << " numeric "
                       << rep.worst_numeric);
            REQUIRE(rep.deterministic);
            REQUIRE(rep.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("lstm cell zero everything gives zero state", "[lstm]") {
    RngStream rng(1);
    auto p = LstmParams<double>::create(3, 4, rng);
    for (auto& v : p.parameters()) v->value.fill(0.0);
    auto x = make_constant(Tensor<double>(Shape{1, 3}));
    auto st = lstm_zero_state(p, 1);
    auto out = lstm_cell_forward(p, x, st);
    for (std::int64_t i = 0; i < 4; ++i) {
        REQUIRE(out.h->value[i] == 0.0);
        REQUIRE(out.c->value[i] == 0.0);
    }
}

TEST_CASE("lstm cell matches hand-evaluated gates on a scalar cell", "[lstm]") {
    // Independent oracle: the four gate equations evaluated with plain
    // arithmetic for input_size = hidden_size = 1.
    const double wi_x = 0.5, wi_h = -0.25, bi = 0.1;
    const double wf_x = 0.3, wf_h = 0.2, bf = -0.2;
    const double wg_x = 1.0, wg_h = 0.5, bg = 0.0;
    const double wo_x = -0.4, wo_h = 0.6, bo = 0.2;
    const double x = 1.0, h0 = 0.5, c0 = -0.3;

    const double i = sig(wi_x * x + wi_h * h0 + bi);
    const double f = sig(wf_x * x + wf_h * h0 + bf);
    const double g = std::tanh(wg_x * x + wg_h * h0 + bg);
    const double o = sig(wo_x * x + wo_h * h0 + bo);
    const double c1 = f * c0 + i * g;
    const double h1 = o * std::tanh(c1);

    LstmParams<double> p;
    p.input_size = 1;
    p.hidden_size = 1;
    p.w_input = make_param(Tensor<double>(Shape{1, 2}, {wi_x, wi_h}));
    p.w_forget = make_param(Tensor<double>(Shape{1, 2}, {wf_x, wf_h}));
    p.w_cell = make_param(Tensor<double>(Shape{1, 2}, {wg_x, wg_h}));
    p.w_output = make_param(Tensor<double>(Shape{1, 2}, {wo_x, wo_h}));
    p.b_input = make_param(Tensor<double>::scalar(bi));
    p.b_forget = make_param(Tensor<double>::scalar(bf));
    p.b_cell = make_param(Tensor<double>::scalar(bg));
    p.b_output = make_param(Tensor<double>::scalar(bo));

    LstmState<double> st{make_constant(Tensor<double>(Shape{1, 1}, {h0})),
                         make_constant(Tensor<double>(Shape{1, 1}, {c0}))};
    auto out = lstm_cell_forward(p, make_constant(Tensor<double>(Shape{1, 1}, {x})), st);
    REQUIRE(out.h->value[0] == Catch::Approx(h1).epsilon(1e-14));
    REQUIRE(out.c->value[0] == Catch::Approx(c1).epsilon(1e-14));
}

TEST_CASE("lstm cell rejects shape mismatches", "[lstm]") {
    RngStream rng(2);
    auto p = LstmParams<double>::create(3, 4, rng);
    auto bad = make_constant(Tensor<double>(Shape{1, 5}));
    auto st = lstm_zero_state(p, 1);
    REQUIRE_THROWS_AS(lstm_cell_forward(p, bad, st), ShapeError);
}

TEST_CASE("lstm gradients match finite differences", "[lstm][grad_check]") {
    RngStream rng(derive_stream(99, "lstmgc"));
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t in = 1 + static_cast<std::int64_t>(rng.next_below(3));
        const std::int64_t hid = 1 + static_cast<std::int64_t>(rng.next_below(3));
        const std::int64_t B = 1 + static_cast<std::int64_t>(rng.next_below(2));
        auto p = LstmParams<double>::create(in, hid, rng);
        auto x0 = make_constant(random_tensor(Shape{B, in}, rng));
        auto x1 = make_constant(random_tensor(Shape{B, in}, rng));
        auto fn = [&] {
            auto st = lstm_zero_state(p, B);
            st = lstm_cell_forward(p, x0, st);
            st = lstm_cell_forward(p, x1, st);
            return sum_all(st.h);
        };
        auto rep = grad_check<double>(fn, p.parameters());
        INFO("trial " << trial << " in " << in << " hid " << hid);
        REQUIRE(rep.max_relative_error < 1e-4);
    }
}

TEST_CASE("residual block with zero f-path is the identity", "[residual]") {
    RngStream rng(3);
    auto p = ResidualBlockParams<double>::create(5, rng);
    p.w1->value.fill(0.0);
    p.b1->value.fill(0.0);
    p.w2->value.fill(0.0);
    p.b2->value.fill(0.0);
    auto x = make_constant(random_tensor(Shape{3, 5}, rng));
    auto y = residual_block_forward(p, x);
    for (std::int64_t i = 0; i < x->value.numel(); ++i) REQUIRE(y->value[i] == x->value[i]);
}

TEST_CASE("residual block matches hand evaluation on width 2", "[residual]") {
    // Oracle: affine -> relu -> affine + skip computed with plain arithmetic.
    ResidualBlockParams<double> p;
    p.width = 2;
    p.w1 = make_param(Tensor<double>(Shape{2, 2}, {1.0, 0.0, 0.0, 1.0}));
    p.b1 = make_param(Tensor<double>(Shape{2}, {0.1, -0.2}));
    p.w2 = make_param(Tensor<double>(Shape{2, 2}, {0.5, 0.25, 0.0, 1.0}));
    p.b2 = make_param(Tensor<double>(Shape{2}, {0.0, 0.1}));
    const double x0 = 0.3, x1 = -0.4;
    const double a0 = std::max(0.0, x0 + 0.1), a1 = std::max(0.0, x1 - 0.2);
    const double y0 = x0 + 0.5 * a0 + 0.25 * a1;
    const double y1 = x1 + 0.0 * a0 + 1.0 * a1 + 0.1;
    auto y = residual_block_forward(p, make_constant(Tensor<double>(Shape{1, 2}, {x0, x1})));
    REQUIRE(y->value[0] == Catch::Approx(y0).epsilon(1e-14));
    REQUIRE(y->value[1] == Catch::Approx(y1).epsilon(1e-14));
    REQUIRE_THROWS_AS(
        residual_block_forward(p, make_constant(Tensor<double>(Shape{1, 3}))), ShapeError);
}

TEST_CASE("residual block gradients match finite differences", "[residual][grad_check]") {
    RngStream rng(derive_stream(99, "resgc"));
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t w = 1 + static_cast<std::int64_t>(rng.next_below(4));
        auto p = ResidualBlockParams<double>::create(w, rng);
        auto x = make_constant(random_tensor(Shape{2, w}, rng));
        auto fn = [&] { return sum_all(mul(residual_block_forward(p, x),
                                           residual_block_forward(p, x))); };
        auto rep = grad_check<double>(fn, p.parameters());
        REQUIRE(rep.max_relative_error < 1e-4);
    }
}

TEST_CASE("straight-through binarize forward and backward", "[straight_through]") {
    auto z = make_param(Tensor<double>(Shape{3}, {0.2, 0.7, 0.5}));
    auto l = straight_through_binarize(z);
    REQUIRE(l->value[0] == 0.0);
    REQUIRE(l->value[1] == 1.0);
    REQUIRE(l->value[2] == 1.0); // tie at 0.5 binarizes to 1

    zero_grads<double>({z});
    backward(sum_all(l));
    for (int i = 0; i < 3; ++i) REQUIRE(z->grad[i] == 1.0);
}

TEST_CASE("straight-through output is exactly binary", "[straight_through][properties]") {
    RngStream rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> t(Shape{17});
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.next_double();
        auto l = straight_through_binarize(make_param(std::move(t)));
        for (std::int64_t i = 0; i < l->value.numel(); ++i)
            REQUIRE((l->value[i] == 0.0 || l->value[i] == 1.0));
    }
}

TEST_CASE("straight-through composite loss gradient flows through the z path",
          "[straight_through]") {
    // Loss ||l - t||^2 with l = ST(sigmoid(w x)). The tape gradient must equal
    // the chain 2(l - t)/n * z(1-z) * x, i.e. the surrogate where l replaces z
    // only in the forward value.
    const std::vector<double> xs = {0.8, -1.3, 0.4};
    const std::vector<double> ws = {1.1, 0.3, -2.0};
    const std::vector<double> ts = {1.0, 0.0, 0.0};
    auto w = make_param(Tensor<double>(Shape{3}, std::vector<double>(ws)));
    auto x = make_constant(Tensor<double>(Shape{3}, std::vector<double>(xs)));
    auto z = sigmoid(mul(w, x));
    auto l = straight_through_binarize(z);
    auto loss = mse_against(l, Tensor<double>(Shape{3}, std::vector<double>(ts)));
    zero_grads<double>({w});
    backward(loss);
    for (int i = 0; i < 3; ++i) {
        const double zi = sig(ws[i] * xs[i]);
        const double li = zi >= 0.5 ? 1.0 : 0.0;
        const double expected = 2.0 / 3.0 * (li - ts[i]) * zi * (1.0 - zi) * xs[i];
        REQUIRE(w->grad[i] == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("adam zero gradients leave parameters unchanged", "[adam]") {
    auto p = make_param(Tensor<double>(Shape{4}, {1.0, -2.0, 3.0, 0.5}));
    auto st = AdamState<double>::create({p}, 0.1);
    p->ensure_grad();
    const auto before = p->value;
    for (int k = 0; k < 5; ++k) REQUIRE(adam_step<double>({p}, st));
    for (std::int64_t i = 0; i < 4; ++i) REQUIRE(p->value[i] == before[i]);
    REQUIRE(st.step == 5);
}

TEST_CASE("adam single step matches the bias-corrected formula", "[adam]") {
    // Oracle: one Adam step computed with plain arithmetic.
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g = 0.5, p0 = 1.0;
    const double m = (1 - b1) * g;
    const double v = (1 - b2) * g * g;
    const double mhat = m / (1 - b1);
    const double vhat = v / (1 - b2);
    const double expect = p0 - lr * mhat / (std::sqrt(vhat) + eps);

    auto p = make_param(Tensor<double>::scalar(p0));
    auto st = AdamState<double>::create({p}, lr);
    p->ensure_grad();
    p->grad[0] = g;
    REQUIRE(adam_step<double>({p}, st));
    REQUIRE(p->value[0] == Catch::Approx(expect).epsilon(1e-14));
}

TEST_CASE("adam rejects non-finite gradients without stepping", "[adam]") {
    auto p = make_param(Tensor<double>::scalar(1.0));
    auto st = AdamState<double>::create({p}, 0.1);
    p->ensure_grad();
    p->grad[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_FALSE(adam_step<double>({p}, st));
    REQUIRE(st.step == 0);
    REQUIRE(p->value[0] == 1.0);
}

TEST_CASE("adam descends a convex quadratic", "[adam]") {
    auto p = make_param(Tensor<double>::scalar(3.0));
    auto st = AdamState<double>::create({p}, 0.05);
    auto loss_value = [&] { return (p->value[0] - 1.0) * (p->value[0] - 1.0); };
    const double l0 = loss_value();
    for (int k = 0; k < 2; ++k) {
        zero_grads<double>({p});
        auto c = make_constant(Tensor<double>::scalar(-1.0));
        auto loss = mul(add(p, c), add(p, c));
        backward(loss);
        REQUIRE(adam_step<double>({p}, st));
    }
    REQUIRE(loss_value() < l0);
}

TEST_CASE("global gradient norm clipping", "[adam]") {
    auto a = make_param(Tensor<double>(Shape{2}, {0.0, 0.0}));
    auto b = make_param(Tensor<double>(Shape{1}, {0.0}));
    a->ensure_grad();
    b->ensure_grad();
    a->grad[0] = 3.0;
    a->grad[1] = 0.0;
    b->grad[0] = 4.0;
    const double norm = clip_global_grad_norm<double>({a, b}, 1.0);
    REQUIRE(norm == Catch::Approx(5.0));
    REQUIRE(a->grad[0] == Catch::Approx(0.6));
    REQUIRE(b->grad[0] == Catch::Approx(0.8));
}

TEST_CASE("checkpoint round trip with optimizer state and seed", "[checkpoint]") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "tg_ckpt_test.bin";

    Checkpoint ck;
    RngStream rng(5);
    auto t = random_tensor(Shape{3, 4}, rng);
    ck.add("agent/lstm/w_input", t.cast<float>());
    ck.add("adam/m/agent/lstm/w_input", Tensor<float>(Shape{3, 4}, 0.25f));
    ck.set_meta("adam/step", 42);
    ck.set_meta("rng/master_seed", 0xDEADBEEFull);
    ck.save(path.string());

    auto loaded = Checkpoint::load(path.string());
    auto back = loaded.tensor<float>("agent/lstm/w_input");
    REQUIRE(back.shape() == Shape{3, 4});
    for (std::int64_t i = 0; i < back.numel(); ++i)
        REQUIRE(back[i] == static_cast<float>(t[i]));
    REQUIRE(loaded.meta("adam/step") == 42);
    REQUIRE(loaded.meta("rng/master_seed") == 0xDEADBEEFull);
    REQUIRE(loaded.has_tensor("adam/m/agent/lstm/w_input"));
    fs::remove(path);
}

TEST_CASE("checkpoint rejects corrupted magic", "[checkpoint]") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "tg_ckpt_bad.bin";
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOT-A-CHECKPOINT-XX\n"
          << std::string(64, 'x');
    }
    REQUIRE_THROWS_AS(Checkpoint::load(path.string()), CheckpointError);
    fs::remove(path);
}

TEST_CASE("no-grad rollouts do not retain graph", "[autodiff]") {
    RngStream rng(6);
    auto w = make_param(random_tensor(Shape{4, 4}, rng));
    auto b = make_param(random_tensor(Shape{4}, rng));
    NoGradGuard guard;
    auto x = make_constant(random_tensor(Shape{2, 4}, rng));
    auto y = sigmoid(affine(x, w, b));
    REQUIRE(y->parents.empty());
    REQUIRE_FALSE(y->needs_grad());
}
