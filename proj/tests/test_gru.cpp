#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "skelrec/gru.hpp"

using namespace skelrec;

namespace {

GruCell random_cell(int hidden, int input, std::uint64_t seed) {
    Rng rng(seed);
    return GruCell::random(hidden, input, rng);
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

struct Span {
    double* data;
    Eigen::Index size;
};

std::vector<Span> cell_spans(GruCell& p) {
    return {{p.w_r.data(), p.w_r.size()}, {p.w_z.data(), p.w_z.size()},
            {p.w_h.data(), p.w_h.size()}, {p.u_r.data(), p.u_r.size()},
            {p.u_z.data(), p.u_z.size()}, {p.u_h.data(), p.u_h.size()},
            {p.b_r.data(), p.b_r.size()}, {p.b_z.data(), p.b_z.size()},
            {p.b_h.data(), p.b_h.size()}};
}

std::vector<Span> grad_spans(GruCellGrads& g) {
    return {{g.w_r.data(), g.w_r.size()}, {g.w_z.data(), g.w_z.size()},
            {g.w_h.data(), g.w_h.size()}, {g.u_r.data(), g.u_r.size()},
            {g.u_z.data(), g.u_z.size()}, {g.u_h.data(), g.u_h.size()},
            {g.b_r.data(), g.b_r.size()}, {g.b_z.data(), g.b_z.size()},
            {g.b_h.data(), g.b_h.size()}};
}

}  // namespace

TEST_CASE("zero parameters and zero inputs give a zero state") {
    GruCell p = GruCell::zeros(4, 3);
    Eigen::MatrixXd h =
        gru_step(p, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 3)), Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 4)));
    CHECK(h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("saturated update gate writes the candidate") {
    GruCell p = GruCell::zeros(4, 3);
    p.b_z.setConstant(30.0);  // z ~ 1
    p.b_h.setConstant(0.5);
    Eigen::MatrixXd h =
        gru_step(p, Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, 3)), Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, 4)));
    for (int i = 0; i < 4; ++i) CHECK(h(0, i) == doctest::Approx(std::tanh(0.5)).epsilon(1e-9));
}

TEST_CASE("closed update gate carries the previous state") {
    GruCell p = GruCell::zeros(4, 3);
    p.b_z.setConstant(-30.0);  // z ~ 0
    Eigen::MatrixXd h0 = Eigen::MatrixXd::Constant(1, 4, 0.7);
    Eigen::MatrixXd h = gru_step(p, Eigen::MatrixXd::Zero(1, 3), h0);
    CHECK((h - h0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("closed reset gate hides the previous state from the candidate") {
    GruCell p = GruCell::zeros(2, 2);
    p.b_r.setConstant(-30.0);       // r ~ 0
    p.b_z.setConstant(30.0);        // h' ~ candidate
    p.u_h.setConstant(5.0);         // would swamp the candidate if r were open
    p.w_h << 1, 0, 0, 1;
    Eigen::MatrixXd x(1, 2);
    x << 0.3, -0.2;
    Eigen::MatrixXd h = gru_step(p, x, Eigen::MatrixXd::Constant(1, 2, 0.9));
    CHECK(h(0, 0) == doctest::Approx(std::tanh(0.3)).epsilon(1e-9));
    CHECK(h(0, 1) == doctest::Approx(std::tanh(-0.2)).epsilon(1e-9));
}

TEST_CASE("state stays inside max(|h|, 1) elementwise") {
    GruCell p = random_cell(6, 4, 77);
    Eigen::MatrixXd x = 3.0 * random_matrix(5, 4, 1);
    Eigen::MatrixXd h = 2.0 * random_matrix(5, 6, 2);
    Eigen::MatrixXd h1 = gru_step(p, x, h);
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        for (Eigen::Index j = 0; j < h.cols(); ++j)
            CHECK(std::abs(h1(i, j)) <= std::max(std::abs(h(i, j)), 1.0) + 1e-12);
}

TEST_CASE("batched step matches the vector overload row by row") {
    GruCell p = random_cell(5, 4, 31);
    Eigen::MatrixXd x = random_matrix(3, 4, 3);
    Eigen::MatrixXd h = random_matrix(3, 5, 4);
    Eigen::MatrixXd batch = gru_step(p, x, h);
    for (int b = 0; b < 3; ++b) {
        Eigen::VectorXd one = gru_step(p, Eigen::VectorXd(x.row(b)), Eigen::VectorXd(h.row(b)));
        CHECK((batch.row(b).transpose() - one).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("random init respects the uniform fan-in bound and the seed") {
    GruCell a = random_cell(9, 5, 123);
    GruCell b = random_cell(9, 5, 123);
    GruCell c = random_cell(9, 5, 124);
    const double bound = 1.0 / 3.0;  // 1/sqrt(9)
    double spread = 0.0;
    for (auto [pa, pb, pc] :
         {std::tuple{&a.w_r, &b.w_r, &c.w_r}, std::tuple{&a.u_h, &b.u_h, &c.u_h}}) {
        CHECK(pa->cwiseAbs().maxCoeff() <= bound);
        CHECK((*pa - *pb).cwiseAbs().maxCoeff() == 0.0);
        spread = std::max(spread, (*pa - *pc).cwiseAbs().maxCoeff());
    }
    CHECK(a.b_r.cwiseAbs().maxCoeff() <= bound);
    CHECK(spread > 0.0);
}

TEST_CASE("step backward matches central finite differences") {
    const int hidden = 3, input = 2, batch = 2;
    GruCell p = random_cell(hidden, input, 55);
    Eigen::MatrixXd x = random_matrix(batch, input, 5);
    Eigen::MatrixXd h0 = 0.5 * random_matrix(batch, hidden, 6);
    Eigen::MatrixXd dh_next = random_matrix(batch, hidden, 7);

    auto loss = [&](const GruCell& q, const Eigen::MatrixXd& xx, const Eigen::MatrixXd& hh) {
        return (gru_step(q, xx, hh).array() * dh_next.array()).sum();
    };

    GruStepTrace trace;
    gru_step(p, x, h0, &trace);
    GruCellGrads grads = GruCellGrads::zeros(hidden, input);
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(batch, input);
    Eigen::MatrixXd dh0 = Eigen::MatrixXd::Zero(batch, hidden);
    gru_step_backward(p, trace, x, h0, dh_next, &grads, &dx, &dh0);

    const double eps = 1e-6;
    auto check = [&](double analytic, double* slot) {
        const double keep = *slot;
        *slot = keep + eps;
        const double up = loss(p, x, h0);
        *slot = keep - eps;
        const double down = loss(p, x, h0);
        *slot = keep;
        const double fd = (up - down) / (2 * eps);
        CHECK(std::abs(analytic - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    };

    auto params = cell_spans(p);
    auto analytic = grad_spans(grads);
    for (size_t t = 0; t < params.size(); ++t)
        for (Eigen::Index i = 0; i < params[t].size; ++i)
            check(analytic[t].data[i], params[t].data + i);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x.data()[i];
        x.data()[i] = keep + eps;
        const double up = loss(p, x, h0);
        x.data()[i] = keep - eps;
        const double down = loss(p, x, h0);
        x.data()[i] = keep;
        CHECK(std::abs(dx.data()[i] - (up - down) / (2 * eps)) <= 1e-5);
    }
    for (Eigen::Index i = 0; i < h0.size(); ++i) {
        const double keep = h0.data()[i];
        h0.data()[i] = keep + eps;
        const double up = loss(p, x, h0);
        h0.data()[i] = keep - eps;
        const double down = loss(p, x, h0);
        h0.data()[i] = keep;
        CHECK(std::abs(dh0.data()[i] - (up - down) / (2 * eps)) <= 1e-5);
    }
}

TEST_CASE("zero rows of dh_next contribute nothing") {
    const int hidden = 4, input = 3, batch = 3;
    GruCell p = random_cell(hidden, input, 91);
    Eigen::MatrixXd x = random_matrix(batch, input, 8);
    Eigen::MatrixXd h0 = random_matrix(batch, hidden, 9);
    Eigen::MatrixXd dh = random_matrix(batch, hidden, 10);
    dh.row(1).setZero();  // masked element

    GruStepTrace trace;
    gru_step(p, x, h0, &trace);
    GruCellGrads full = GruCellGrads::zeros(hidden, input);
    Eigen::MatrixXd dx = Eigen::MatrixXd::Constant(batch, input, -1);
    Eigen::MatrixXd dh0 = Eigen::MatrixXd::Constant(batch, hidden, -1);
    gru_step_backward(p, trace, x, h0, dh, &full, &dx, &dh0);

    CHECK(dx.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dh0.row(1).cwiseAbs().maxCoeff() == 0.0);

    // Same parameter gradients as a batch that omits the masked row.
    Eigen::MatrixXd x2(2, input), h2(2, hidden), d2(2, hidden);
    x2 << x.row(0), x.row(2);
    h2 << h0.row(0), h0.row(2);
    d2 << dh.row(0), dh.row(2);
    GruStepTrace trace2;
    gru_step(p, x2, h2, &trace2);
    GruCellGrads part = GruCellGrads::zeros(hidden, input);
    gru_step_backward(p, trace2, x2, h2, d2, &part, nullptr, nullptr);

    auto a = grad_spans(full);
    auto b = grad_spans(part);
    for (size_t t = 0; t < a.size(); ++t)
        for (Eigen::Index i = 0; i < a[t].size; ++i)
            CHECK(a[t].data[i] == doctest::Approx(b[t].data[i]).epsilon(1e-12));
}
