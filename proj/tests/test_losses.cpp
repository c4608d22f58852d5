#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gift/losses.hpp"
#include "gift/errors.hpp"
#include "helpers.hpp"

using namespace gift;
using testutil::random_tensor;

namespace {

Tensor unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = random_tensor(rng, rows, cols, -1, 1);
    for (std::size_t i = 0; i < rows; ++i) {
        double norm = 0;
        for (std::size_t j = 0; j < cols; ++j) norm += t.at(i, j) * t.at(i, j);
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < cols; ++j) t.at(i, j) /= norm;
    }
    return t;
}

// direct softmax of one row of a matrix (or its transpose) with temperature
std::vector<double> softmax_line(const Tensor& m, std::size_t idx, bool row, double tau) {
    const std::size_t n = row ? m.cols() : m.rows();
    std::vector<double> v(n);
    double mx = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
        v[j] = (row ? m.at(idx, j) : m.at(j, idx)) / tau;
        mx = std::max(mx, v[j]);
    }
    double sum = 0;
    for (auto& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : v) x /= sum;
    return v;
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0) acc += p[i] * std::log(p[i] / q[i]);
    return acc;
}

double entropy(const std::vector<double>& p) {
    double acc = 0;
    for (double x : p)
        if (x > 0) acc -= x * std::log(x);
    return acc;
}

// full cd_loss by direct arithmetic
double cd_oracle(const Tensor& s, const Tensor& t, double tau_s, double tau_t) {
    const std::size_t b = s.rows();
    double rows = 0, cols = 0;
    for (std::size_t i = 0; i < b; ++i) {
        rows += kl(softmax_line(t, i, true, tau_t), softmax_line(s, i, true, tau_s));
        cols += kl(softmax_line(t, i, false, tau_t), softmax_line(s, i, false, tau_s));
    }
    return rows / static_cast<double>(b) + cols / static_cast<double>(b);
}

} // namespace

TEST_CASE("contrastive matrix: self-cosines, orthogonality, pairwise oracle") {
    Rng rng(5);
    const Tensor z = unit_rows(rng, 4, 6);
    const ContrastiveMatrix self = contrastive_matrix({z, z});
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(self.values.at(i, i) - 1.0) < 1e-12);

    const Tensor a = Tensor::from_rows({{1, 0, 0}});
    const Tensor b = Tensor::from_rows({{0, 1, 0}});
    CHECK(contrastive_matrix({a, b}).values.at(0, 0) == 0.0);

    const Tensor w = unit_rows(rng, 4, 6);
    const ContrastiveMatrix m = contrastive_matrix({z, w});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double dot = 0;
            for (std::size_t d = 0; d < 6; ++d) dot += z.at(i, d) * w.at(j, d);
            CHECK(std::abs(m.values.at(i, j) - dot) < 1e-12);
            CHECK(std::abs(m.values.at(i, j)) <= 1.0 + 1e-9);
        }
}

TEST_CASE("cd_loss: identity, B=1, hand oracle, transpose symmetry, nonnegativity") {
    Rng rng(7);
    const Tensor m = random_tensor(rng, 3, 3, -1, 1);
    CHECK(std::abs(cd_loss({m}, {m}, 0.5, 0.5)) < 1e-10);

    const Tensor single = Tensor::from_rows({{0.4}});
    CHECK(cd_loss({single}, {single}, 1.0, 1.0) == 0.0);

    const Tensor s2 = Tensor::from_rows({{0.9, 0.1}, {-0.2, 0.8}});
    const Tensor t2 = Tensor::from_rows({{0.7, 0.3}, {0.1, 0.6}});
    CHECK(std::abs(cd_loss({s2}, {t2}, 0.7, 0.9) - cd_oracle(s2, t2, 0.7, 0.9)) < 1e-12);

    // transposing both matrices swaps the row and column terms
    Tensor st(2, 2), tt(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            st.at(j, i) = s2.at(i, j);
            tt.at(j, i) = t2.at(i, j);
        }
    CHECK(std::abs(cd_loss({s2}, {t2}, 0.7, 0.9) - cd_loss({st}, {tt}, 0.7, 0.9)) < 1e-12);

    for (int trial = 0; trial < 25; ++trial) {
        const Tensor s = random_tensor(rng, 4, 4, -1, 1);
        const Tensor t = random_tensor(rng, 4, 4, -1, 1);
        CHECK(cd_loss({s}, {t}, 0.6, 0.8) >= 0.0);
    }
}

TEST_CASE("cd_loss rejects mismatched batches and empty batches") {
    Rng rng(9);
    const Tensor a = random_tensor(rng, 3, 3);
    const Tensor b = random_tensor(rng, 2, 2);
    CHECK_THROWS_AS(cd_loss({a}, {b}, 1, 1), ContractError);
}

TEST_CASE("ita_loss: uniform B=2 gives 2 log 2, B=1 gives 0, neg-log-diag oracle") {
    const Tensor flat = Tensor::from_rows({{0.3, 0.3}, {0.3, 0.3}});
    CHECK(std::abs(ita_loss({flat}, 1.0) - 2.0 * std::log(2.0)) < 1e-12);

    CHECK(ita_loss({Tensor::from_rows({{0.9}})}, 0.7) == 0.0);

    Rng rng(11);
    const Tensor m = random_tensor(rng, 3, 3, -1, 1);
    const double tau = 0.8;
    double expected = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        expected -= std::log(softmax_line(m, i, true, tau)[i]);
        expected -= std::log(softmax_line(m, i, false, tau)[i]);
    }
    expected /= 3.0;
    CHECK(std::abs(ita_loss({m}, tau) - expected) < 1e-12);
}

TEST_CASE("ita_loss strictly decreases when the diagonal is raised") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor m = random_tensor(rng, 4, 4, -0.8, 0.8);
        const double before = ita_loss({m}, 0.9);
        for (std::size_t i = 0; i < 4; ++i) m.at(i, i) += 0.1;
        CHECK(ita_loss({m}, 0.9) < before);
    }
}

TEST_CASE("ce_loss: hand values, uniform prediction, label guard") {
    // near-one-hot prediction, eps = 0: loss tends to zero
    const Tensor sharp = Tensor::from_rows({{1.0 - 2e-9, 1e-9, 1e-9}});
    CHECK(ce_loss(sharp, {0}, 0.0) < 1e-8);

    // eps = 0 is plain cross-entropy
    const Tensor probs = Tensor::from_rows({{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}});
    const double expected = -(std::log(0.5) + std::log(0.6)) / 2.0;
    CHECK(std::abs(ce_loss(probs, {1, 0}, 0.0) - expected) < 1e-12);

    // uniform prediction gives log K for any smoothing
    const Tensor uniform = Tensor::from_rows({{0.25, 0.25, 0.25, 0.25}});
    CHECK(std::abs(ce_loss(uniform, {2}, 0.0) - std::log(4.0)) < 1e-12);
    CHECK(std::abs(ce_loss(uniform, {2}, 0.2) - std::log(4.0)) < 1e-12);
    CHECK(std::abs(ce_loss(uniform, {2}, 0.7) - std::log(4.0)) < 1e-12);

    CHECK_THROWS_AS(ce_loss(probs, {3, 0}, 0.0), ContractError);
    CHECK_THROWS_AS(ce_loss(probs, {-1, 0}, 0.0), ContractError);
}

TEST_CASE("smoothed targets: rows sum to one, mass split as specified") {
    const Tensor t = smoothed_targets(4, {1}, 0.2);
    CHECK(std::abs(t.at(0, 1) - (0.8 + 0.05)) < 1e-15);
    CHECK(std::abs(t.at(0, 0) - 0.05) < 1e-15);
    double sum = 0;
    for (std::size_t j = 0; j < 4; ++j) sum += t.at(0, j);
    CHECK(std::abs(sum - 1.0) < 1e-15);
}

TEST_CASE("total_loss: reduction, stock weights, linearity") {
    LossWeights w;
    w.alpha = 0;
    w.beta = 0;
    CHECK(total_loss(1.25, 9.0, 7.0, w) == 1.25);

    LossWeights stock;
    stock.alpha = 1.0;
    stock.beta = 0.25;
    CHECK(std::abs(total_loss(1.0, 0.5, 0.4, stock) - 1.6) < 1e-15);

    const double base = total_loss(1.0, 0.5, 0.4, stock);
    const double doubled = total_loss(1.0, 1.0, 0.4, stock);
    CHECK(std::abs((doubled - base) - stock.alpha * 0.5) < 1e-15);
}

TEST_CASE("distill_cross_entropy: teacher entropy offset") {
    Rng rng(17);
    const Tensor m = random_tensor(rng, 3, 3, -1, 1);
    // student == teacher: value equals the teacher entropy
    const double h = teacher_entropy({m}, 0.8);
    CHECK(std::abs(distill_cross_entropy({m}, {m}, 0.8, 0.8) - h) < 1e-10);

    CHECK(distill_cross_entropy({Tensor::from_rows({{0.2}})},
                                {Tensor::from_rows({{0.2}})}, 1, 1) == 0.0);

    // independent entropy oracle
    const Tensor s = random_tensor(rng, 3, 3, -1, 1);
    const Tensor t = random_tensor(rng, 3, 3, -1, 1);
    double oracle = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        oracle += entropy(softmax_line(t, i, true, 0.9));
        oracle += entropy(softmax_line(t, i, false, 0.9));
    }
    oracle /= 3.0;
    const double dx = distill_cross_entropy({s}, {t}, 0.7, 0.9);
    const double cd = cd_loss({s}, {t}, 0.7, 0.9);
    CHECK(std::abs((dx - cd) - oracle) < 1e-12);
}

TEST_CASE("gradient of the combined objective matches finite differences") {
    const ModelArch arch{6, 5, 8, 4};
    const TwoTowerModel teacher_model = TwoTowerModel::init(arch, 202);
    const ModelSnapshot teacher = ModelSnapshot::of(teacher_model, 0, 0);
    TwoTowerModel student = TwoTowerModel::init(arch, 101);

    Rng rng(19);
    const Tensor task_images = random_tensor(rng, 4, 6);
    const Tensor class_texts = random_tensor(rng, 3, 5);
    const std::vector<int> labels{0, 2, 1, 0};
    const Tensor synth_images = random_tensor(rng, 4, 6);
    const Tensor synth_texts = random_tensor(rng, 4, 5);
    LossWeights w;
    w.alpha = 1.0;
    w.beta = 0.25;
    w.label_smoothing = 0.2;

    const Tensor teacher_m =
        contrastive_matrix(encode(teacher_model, synth_images, synth_texts)).values;
    const double tau_t = teacher.temperature();
    const ParamLayout layout = student.layout();

    auto objective = [&](const std::vector<double>& flat) {
        const double tau_s = std::exp(flat[layout.log_tau.offset]);
        Graph g;
        const ModelNodes nodes = bind_model(g, arch, flat, false, false);
        const NodeId zt = encode_images_node(g, nodes, g.constant(task_images));
        const NodeId wt = encode_texts_node(g, nodes, g.constant(class_texts));
        const NodeId ce = ce_loss_node(g, g.matmul(zt, g.transpose(wt)), tau_s, labels,
                                       w.label_smoothing);
        const NodeId zs = encode_images_node(g, nodes, g.constant(synth_images));
        const NodeId ws = encode_texts_node(g, nodes, g.constant(synth_texts));
        const NodeId m = contrastive_matrix_node(g, zs, ws);
        const NodeId cd = cd_loss_node(g, m, teacher_m, tau_s, tau_t);
        const NodeId ita = ita_loss_node(g, m, tau_s);
        return g.scalar_value(total_loss_node(g, ce, cd, ita, w));
    };

    Graph g;
    const ModelNodes nodes = bind_model(g, arch, student.params(), true, false);
    const double tau_s = student.temperature();
    const NodeId zt = encode_images_node(g, nodes, g.constant(task_images));
    const NodeId wt = encode_texts_node(g, nodes, g.constant(class_texts));
    const NodeId ce =
        ce_loss_node(g, g.matmul(zt, g.transpose(wt)), tau_s, labels, w.label_smoothing);
    const NodeId zs = encode_images_node(g, nodes, g.constant(synth_images));
    const NodeId ws = encode_texts_node(g, nodes, g.constant(synth_texts));
    const NodeId m = contrastive_matrix_node(g, zs, ws);
    const NodeId cd = cd_loss_node(g, m, teacher_m, tau_s, tau_t);
    const NodeId ita = ita_loss_node(g, m, tau_s);
    const NodeId total = total_loss_node(g, ce, cd, ita, w);
    g.backward(total);
    std::vector<double> analytic(layout.total, 0.0);
    collect_param_grads(g, nodes, layout, analytic);

    const std::vector<double> numeric = finite_diff(objective, student.params(), 1e-5);
    double worst = 0;
    for (std::size_t i = 0; i < layout.log_tau.offset; ++i)
        worst = std::max(worst, testutil::rel_err(analytic[i], numeric[i], 1e-6));
    CHECK(worst < 1e-5);
}

TEST_CASE("loss weights validation") {
    LossWeights w;
    w.alpha = -1;
    CHECK_THROWS_AS(w.validate(), ContractError);
    w = LossWeights{};
    w.label_smoothing = 1.0;
    CHECK_THROWS_AS(w.validate(), ContractError);
}

TEST_CASE("feature distance: zero at the teacher, hand value, finite differences") {
    Rng rng(23);
    const Tensor z = random_tensor(rng, 3, 4);
    const Tensor w = random_tensor(rng, 3, 4);
    {
        Graph g;
        const NodeId d =
            feature_distance_node(g, g.constant(z), g.constant(w), z, w);
        CHECK(g.scalar_value(d) == 0.0);
    }
    {
        Graph g;
        const Tensor z2 = Tensor::from_rows({{1, 0}, {0, 1}});
        const Tensor t2 = Tensor::from_rows({{0, 0}, {0, 0}});
        const NodeId d =
            feature_distance_node(g, g.constant(z2), g.constant(t2), t2, t2);
        CHECK(g.scalar_value(d) == doctest::Approx(1.0).epsilon(1e-15)); // 2 / B
    }
    {
        const Tensor tz = random_tensor(rng, 3, 4);
        const Tensor tw = random_tensor(rng, 3, 4);
        auto value = [&](const std::vector<double>& flat) {
            Graph g;
            const NodeId zz = g.constant(Tensor(3, 4, flat));
            return g.scalar_value(feature_distance_node(g, zz, g.constant(w), tz, tw));
        };
        Graph g;
        const NodeId zz = g.param(z);
        const NodeId d = feature_distance_node(g, zz, g.constant(w), tz, tw);
        g.backward(d);
        const std::vector<double> numeric = finite_diff(value, z.vec(), 1e-6);
        CHECK(testutil::max_rel_err(g.grad(zz).vec(), numeric) < 1e-6);
    }
}

TEST_CASE("distill variant names round-trip") {
    for (const auto v : {DistillVariant::contrastive, DistillVariant::image_only,
                         DistillVariant::text_only, DistillVariant::feature})
        CHECK(distill_variant_from(to_string(v)) == v);
    CHECK_THROWS_AS(distill_variant_from("l2"), ConfigError);
}
