#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ousym/model.hpp"

using namespace ousym;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(BuildSystem, Examples) {
  const OUSystem a = build_ou_system(1, vec({1}), vec({1}), ForceField::constant(vec({0})));
  EXPECT_TRUE(a.isotropic());
  const OUSystem b = build_ou_system(2, vec({1, 2}), vec({1, 1}), ForceField::linear(MatrixXd::Identity(2, 2), VectorXd::Zero(2)));
  EXPECT_FALSE(b.isotropic());
  EXPECT_EQ(kind_of([] { build_ou_system(2, vec({1, 1}), vec({0, 1}), ForceField::constant(VectorXd::Zero(2))); }),
            ErrorKind::ZeroNoise);
  EXPECT_EQ(kind_of([] { build_ou_system(1, vec({0}), vec({1}), ForceField::constant(VectorXd::Zero(1))); }),
            ErrorKind::NonPositiveFriction);
  EXPECT_EQ(kind_of([] { build_ou_system(2, vec({1}), vec({1, 1}), ForceField::constant(VectorXd::Zero(2))); }),
            ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([] { build_ou_system(2, vec({1, 1}), vec({1, 1}), ForceField::constant(VectorXd::Zero(1))); }),
            ErrorKind::DimensionMismatch);
}

TEST(BuildSystem, DriftAndDiffusionLayout) {
  const OUSystem s = build_ou_system(2, vec({1, 2}), vec({3, 4}),
                                     ForceField::linear(MatrixXd::Identity(2, 2), vec({5, 6})));
  const VectorXd f = s.drift<double>(vec({1, 2, 3, 4}));
  EXPECT_TRUE(f.isApprox(vec({3, 4, 1 + 5 - 1 * 3, 2 + 6 - 2 * 4})));
  const MatrixXd sig = s.diffusion<double>();
  MatrixXd expect = MatrixXd::Zero(4, 4);
  expect(2, 2) = 3;
  expect(3, 3) = 4;
  EXPECT_EQ(sig, expect);
}

TEST(ClassifyForce, Examples) {
  const auto p1 = default_force_probes(1);
  EXPECT_EQ(classify_force(ForceField::linear(MatrixXd::Constant(1, 1, 4), vec({3})), p1).tag, ForceTag::LinearRegular);
  const auto p2 = default_force_probes(2);
  const ForceClass c = classify_force(ForceField::constant(vec({5, -1})), p2);
  EXPECT_EQ(c.tag, ForceTag::Constant);
  EXPECT_TRUE(c.c.isApprox(vec({5, -1})));
  const ForceClass r = classify_force(parse_force_expression("(1 + norm(x)^2)*x1; (1 + norm(x)^2)*x2", 2), p2);
  EXPECT_EQ(r.tag, ForceTag::NonlinearSecondOrderRegular);
  EXPECT_TRUE(r.consistent);
  EXPECT_EQ(classify_force(parse_force_expression("x1^3", 1), p1).tag, ForceTag::NonlinearSecondOrderRegular);
}

TEST(ClassifyForce, DegenerateCases) {
  const auto p2 = default_force_probes(2);
  MatrixXd L(2, 2);
  L << 1, 2, 2, 4;
  const ForceClass lin = classify_force(ForceField::linear(L, VectorXd::Zero(2)), p2);
  EXPECT_EQ(lin.tag, ForceTag::LinearDegenerate);
  EXPECT_EQ(lin.rank, 1);
  // the Hessian of x1^2 is singular
  const ForceClass nl = classify_force(parse_force_expression("x1^2; x2", 2), p2);
  EXPECT_EQ(nl.tag, ForceTag::NonlinearSecondOrderDegenerate);
}

TEST(ClassifyForce, InconsistentPiecewiseLinear) {
  const ForceClass c = classify_force(parse_force_expression("abs(x1)", 1), default_force_probes(1));
  EXPECT_FALSE(c.consistent);
}

TEST(ClassifyForce, Errors) {
  EXPECT_EQ(kind_of([] { classify_force(ForceField::constant(vec({1})), {}); }), ErrorKind::EmptyProbeSet);
  EXPECT_EQ(kind_of([] {
              classify_force(parse_force_expression("1/x1", 1), {VectorXd::Zero(1)});
            }),
            ErrorKind::NonFiniteEvaluation);
}

TEST(ForceProperties, LinearEvaluateAndJacobianExact) {
  MatrixXd L(3, 3);
  L << 1, -2, 0.5, 3, 0.25, -1, 0, 7, 2;
  const VectorXd K = vec({0.1, -0.2, 0.3});
  const ForceField f = ForceField::linear(L, K);
  for (const auto& x : default_force_probes(3, 40, 11)) {
    EXPECT_LE((f.evaluate<double>(x) - (L * x + K)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(f.jacobian(x), L);
  }
}

TEST(ForceProperties, ClassificationIdempotentAndOrderIndependent) {
  const ForceField f = parse_force_expression("x1^3 + x2; sin(x1)*x2^2", 2);
  auto probes = default_force_probes(2);
  const ForceClass a = classify_force(f, probes);
  const ForceClass b = classify_force(f, probes);
  std::mt19937 gen(7);
  std::shuffle(probes.begin(), probes.end(), gen);
  const ForceClass c = classify_force(f, probes);
  EXPECT_EQ(a.tag, b.tag);
  EXPECT_EQ(a.tag, c.tag);
  EXPECT_EQ(a.consistent, c.consistent);

  MatrixXd L(2, 2);
  L << 1, 2, 2, 4;
  auto lp = default_force_probes(2);
  const ForceTag t1 = classify_force(ForceField::linear(L, VectorXd::Zero(2)), lp).tag;
  std::reverse(lp.begin(), lp.end());
  EXPECT_EQ(classify_force(ForceField::linear(L, VectorXd::Zero(2)), lp).tag, t1);
}

TEST(ForceProperties, ExpressionLinearAgreesWithLinearVariant) {
  const auto probes = default_force_probes(2);
  MatrixXd L(2, 2);
  L << 2, -1, 0.5, 3;
  const ForceClass a = classify_force(ForceField::linear(L, vec({1, 0})), probes);
  const ForceClass b = classify_force(parse_force_expression("2*x1 - x2 + 1; 0.5*x1 + 3*x2", 2), probes);
  EXPECT_EQ(a.tag, b.tag);
  EXPECT_TRUE(a.L.isApprox(b.L, 1e-12));
  EXPECT_TRUE(a.K.isApprox(b.K, 1e-12));

  L << 1, 2, 2, 4;
  const ForceClass c = classify_force(ForceField::linear(L, VectorXd::Zero(2)), probes);
  const ForceClass d = classify_force(parse_force_expression("x1 + 2*x2; 2*x1 + 4*x2", 2), probes);
  EXPECT_EQ(c.tag, d.tag);
}

TEST(ForceProperties, HessiansSymmetric) {
  const ForceField f = parse_force_expression("x1^2*x2*x3 + sin(x2*x3); exp(x1 - x3)*x2; norm(x)^3", 3);
  for (const auto& x : default_force_probes(3, 20, 5)) {
    for (const MatrixXd& h : f.hessians(x)) EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForceProperties, HessianMatchesHandDerivative) {
  const ForceField f = parse_force_expression("x1^3*x2; 0", 2);
  const std::vector<MatrixXd> h = f.hessians(vec({1.5, -2}));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_NEAR(h[0](0, 0), 6 * 1.5 * -2, 1e-12);
  EXPECT_NEAR(h[0](0, 1), 3 * 1.5 * 1.5, 1e-12);
  EXPECT_NEAR(h[0](1, 1), 0.0, 1e-12);
}

TEST(ForceProperties, IsSingular) {
  EXPECT_TRUE(is_singular(MatrixXd::Zero(2, 2), 1e-8));
  EXPECT_FALSE(is_singular(MatrixXd::Identity(2, 2), 1e-8));
  double ratio = 0;
  MatrixXd m(2, 2);
  m << 1, 0, 0, 1e-10;
  EXPECT_TRUE(is_singular(m, 1e-8, &ratio));
  EXPECT_NEAR(ratio, 1e-10, 1e-20);
}
