#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opd/distill/attention.hpp"
#include "opd/distill/cohort.hpp"
#include "opd/distill/losses.hpp"
#include "opd/errors.hpp"
#include "opd/numerics/grad_check.hpp"
#include "opd/numerics/ops.hpp"
#include "opd/rl/train.hpp"
#include "support.hpp"

using namespace opd;
using namespace opd::distill;
using num::Tensor;
using policy::Algorithm;
using policy::ForwardResult;
using policy::PolicyNetwork;

namespace {

using Spans = std::vector<std::span<const double>>;

Spans spans(const std::vector<std::vector<double>>& vs) {
  Spans out;
  for (const auto& v : vs) out.emplace_back(v);
  return out;
}

// A forward result holding fixed values, for loss tests that need no network.
ForwardResult fixed_output(std::size_t n, std::vector<double> decision, std::vector<double> feature,
                           std::vector<double> value = {}) {
  ForwardResult r;
  const std::size_t p = decision.size() / n, h = feature.size() / n;
  r.decision = Tensor::matrix(n, p, std::move(decision), true);
  r.feature = Tensor::matrix(n, h, std::move(feature), true);
  if (!value.empty()) r.value = Tensor::vector(std::move(value), true);
  return r;
}

struct Cohort {
  std::vector<PolicyNetwork> nets;
  std::vector<const PolicyNetwork*> ptrs() const {
    std::vector<const PolicyNetwork*> p;
    for (const auto& n : nets) p.push_back(&n);
    return p;
  }
};

Cohort random_cohort(Rng& rng, Algorithm algo, std::size_t members, policy::Architecture* arch_out = nullptr) {
  const auto a = testing::random_architecture(rng, algo);
  if (arch_out) *arch_out = a;
  Cohort c;
  for (std::size_t i = 0; i < members; ++i) c.nets.push_back(PolicyNetwork::init(a, rng.next()));
  return c;
}

std::vector<ForwardResult> peer_outputs(const Cohort& c, std::size_t student, const Tensor& states) {
  std::vector<ForwardResult> out;
  num::NoGradGuard g;
  for (std::size_t j = 0; j < c.nets.size(); ++j)
    if (j != student) out.push_back(c.nets[j].forward(states));
  return out;
}

}  // namespace

TEST_SUITE("decision_attention_weights") {
  TEST_CASE("identical peers get uniform weights") {
    const std::vector<double> s{0.3, -1.0, 2.0};
    const std::vector<std::vector<double>> peers(4, {1.0, 0.5, -0.5});
    const auto w = decision_attention_weights(s, spans(peers));
    for (double x : w.weights) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("scaled dot-product hand example") {
    const std::vector<double> s{1, 0};
    const auto w = decision_attention_weights(s, spans({{1, 0}, {0, 1}}));
    CHECK(w.key_dim == 2.0);
    CHECK(std::abs(w[0] - 0.6697615493266569) < 1e-12);
    CHECK(std::abs(w[1] - 0.3302384506733431) < 1e-12);
  }

  TEST_CASE("a single peer gets weight one") {
    const std::vector<double> s{4, -2, 7};
    const auto w = decision_attention_weights(s, spans({{-3, 1, 0.5}}));
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 1.0);
  }

  TEST_CASE("zero peers and dimension mismatches are usage errors") {
    const std::vector<double> s{1, 0};
    CHECK_THROWS_AS(decision_attention_weights(s, {}), UsageError);
    CHECK_THROWS_AS(decision_attention_weights(s, spans({{1, 0, 0}})), UsageError);
    const std::vector<std::vector<double>> empty_peer(1);
    CHECK_THROWS_AS(decision_attention_weights(std::vector<double>{}, spans(empty_peer)), UsageError);
  }

  TEST_CASE("weights form a simplex for random inputs") {
    Rng rng(13);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t d = 1 + rng.below(8), peers = 1 + rng.below(6);
      const double scale = trial % 5 == 0 ? 200.0 : 3.0;
      const auto s = testing::random_vector(rng, d, -scale, scale);
      std::vector<std::vector<double>> p;
      for (std::size_t k = 0; k < peers; ++k) p.push_back(testing::random_vector(rng, d, -scale, scale));
      const auto w = decision_attention_weights(s, spans(p));
      REQUIRE(w.size() == peers);
      double total = 0;
      for (double x : w.weights) {
        CHECK(x >= 0.0);
        total += x;
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("permuting peers permutes weights and keeps the aggregate") {
    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t d = 1 + rng.below(6), peers = 2 + rng.below(5);
      const auto s = testing::random_vector(rng, d, -2, 2);
      std::vector<std::vector<double>> p;
      for (std::size_t k = 0; k < peers; ++k) p.push_back(testing::random_vector(rng, d, -2, 2));
      std::vector<std::size_t> perm(peers);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = peers; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      std::vector<std::vector<double>> q;
      for (auto k : perm) q.push_back(p[k]);

      const auto w = decision_attention_weights(s, spans(p));
      const auto wq = decision_attention_weights(s, spans(q));
      for (std::size_t k = 0; k < peers; ++k) CHECK(std::abs(wq[k] - w[perm[k]]) < 1e-15);
      const auto a = aggregate(spans(p), w);
      const auto b = aggregate(spans(q), wq);
      for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
  }

  TEST_CASE("different scores give different weights") {
    Rng rng(15);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t d = 1 + rng.below(5);
      const auto s = testing::random_vector(rng, d);
      const auto p1 = testing::random_vector(rng, d), p2 = testing::random_vector(rng, d);
      double s1 = 0, s2 = 0;
      for (std::size_t i = 0; i < d; ++i) {
        s1 += s[i] * p1[i];
        s2 += s[i] * p2[i];
      }
      const auto w = decision_attention_weights(s, spans({p1, p2}));
      if (s1 != s2) CHECK(w[0] != w[1]);
      if (s1 > s2) CHECK(w[0] > w[1]);
    }
  }

  TEST_CASE("equal weights are 1/(T-1)") {
    const auto w = equal_weights(4);
    for (double x : w.weights) CHECK(x == doctest::Approx(0.25));
    CHECK_THROWS_AS(equal_weights(0), UsageError);
  }

  TEST_CASE("mode names round-trip") {
    for (auto m : {AttentionMode::kDecisionAttention, AttentionMode::kEqualWeights})
      CHECK(parse_attention_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_attention_mode("uniform"), ConfigError);
  }
}

TEST_SUITE("aggregate") {
  TEST_CASE("half and half of [2,0] and [0,2] is [1,1]") {
    const auto a = aggregate(spans({{2, 0}, {0, 2}}), equal_weights(2));
    CHECK(a == std::vector<double>{1, 1});
  }

  TEST_CASE("equal peers aggregate to their value for any weights") {
    Rng rng(16);
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = testing::random_vector(rng, 5, -100, 100);
      const std::size_t peers = 1 + rng.below(6);
      std::vector<std::vector<double>> keys;
      for (std::size_t k = 0; k < peers; ++k) keys.push_back(testing::random_vector(rng, 5, -3, 3));
      const auto w = decision_attention_weights(testing::random_vector(rng, 5, -3, 3), spans(keys));
      CHECK(aggregate(spans(std::vector<std::vector<double>>(peers, v)), w) == v);
      CHECK(aggregate(std::vector<double>(peers, v[0]), w) == v[0]);
    }
  }

  TEST_CASE("a single peer with weight one is returned as is") {
    const std::vector<double> v{0.1, -7.0, 3.5};
    CHECK(aggregate(spans({v}), decision_attention_weights(v, spans({v}))) == v);
  }

  TEST_CASE("index and dimension mismatches are usage errors") {
    CHECK_THROWS_AS(aggregate(spans({{1, 2}, {3, 4}}), equal_weights(3)), UsageError);
    CHECK_THROWS_AS(aggregate(spans({{1, 2}, {3}}), equal_weights(2)), UsageError);
    AttentionWeights bad{{0.7, 0.7}, 1.0};
    CHECK_THROWS_AS(aggregate(spans({{1}, {2}}), bad), UsageError);
    AttentionWeights negative{{1.5, -0.5}, 1.0};
    CHECK_THROWS_AS(aggregate(std::vector<double>{1, 2}, negative), UsageError);
  }
}

TEST_SUITE("decision_loss") {
  TEST_CASE("the hand KL value 0.14384") {
    CHECK(std::abs(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75}) - 0.14384103622589042) <
          1e-12);
    AggregatedTarget t;
    t.decision = Tensor::matrix(1, 2, {0.0, 0.0});
    const auto student = fixed_output(1, {std::log(0.25), std::log(0.75)}, {0.0});
    const double v = decision_loss(student, t, Algorithm::kDqn, 1.0).item();
    CHECK(std::abs(v - 0.14384103622589042) < 1e-12);
  }

  TEST_CASE("a student equal to the target has zero loss") {
    const auto student = fixed_output(2, {0.3, -1.0, 2.0, 5.0, 5.0, -3.0}, {1, 2, 3, 4}, {0.5, -0.25});
    AggregatedTarget t;
    t.decision = student.decision.detach();
    t.critic = student.value.detach();
    t.feature = student.feature.detach();
    CHECK(decision_loss(student, t, Algorithm::kDqn, 0.7).item() == 0.0);
    CHECK(decision_loss(student, t, Algorithm::kPpo, 1.0).item() == 0.0);
    CHECK(feature_loss(student.feature, t.feature).item() == 0.0);
  }

  TEST_CASE("the critic term is a squared error") {
    const auto student = fixed_output(1, {0.0, 0.0}, {0.0}, {1.0});
    AggregatedTarget t;
    t.decision = Tensor::matrix(1, 2, {0.0, 0.0});
    t.critic = Tensor::vector({2.0});
    CHECK(decision_loss(student, t, Algorithm::kPpo, 1.0).item() == 1.0);
  }

  TEST_CASE("loss is nonnegative for random inputs and zero only on a match") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(4), p = 2 + rng.below(4);
      const auto student = fixed_output(n, testing::random_vector(rng, n * p, -4, 4), std::vector<double>(n, 0.0),
                                        testing::random_vector(rng, n));
      AggregatedTarget t;
      t.decision = testing::random_matrix(rng, n, p, -4, 4);
      t.critic = Tensor::vector(testing::random_vector(rng, n));
      CHECK(decision_loss(student, t, Algorithm::kDqn, rng.uniform(0.2, 3.0)).item() > 0.0);
      CHECK(decision_loss(student, t, Algorithm::kPpo, 1.0).item() > 0.0);
    }
  }

  TEST_CASE("a near-zero student probability is clamped and reported") {
    AggregatedTarget t;
    t.decision = Tensor::matrix(1, 2, {0.0, 0.0});
    const auto student = fixed_output(1, {0.0, -200.0}, {0.0});
    DecisionDiagnostics diag;
    const double v = decision_loss(student, t, Algorithm::kDqn, 1.0, &diag).item();
    CHECK(std::isfinite(v));
    CHECK(diag.clamped_probabilities == 1);
  }

  TEST_CASE("shape mismatches and bad temperatures are rejected") {
    const auto student = fixed_output(1, {0.0, 0.0}, {0.0});
    AggregatedTarget t;
    t.decision = Tensor::matrix(1, 3, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(decision_loss(student, t, Algorithm::kDqn, 1.0), UsageError);
    t.decision = Tensor::matrix(1, 2, {0.0, 0.0});
    CHECK_THROWS_AS(decision_loss(student, t, Algorithm::kDqn, 0.0), ParameterError);
    CHECK_THROWS_AS(decision_loss(student, t, Algorithm::kPpo, 1.0), UsageError);  // no critic
  }
}

TEST_SUITE("feature_loss") {
  TEST_CASE("examples") {
    CHECK(feature_loss(Tensor::matrix(1, 2, {0, 1}), Tensor::matrix(1, 2, {1, 3})).item() == 2.5);
    CHECK(feature_loss(Tensor::matrix(1, 3, {4, 4, 4}), Tensor::matrix(1, 3, {4, 4, 4})).item() == 0.0);
    const std::vector<double> t{0.5, -2.0, 3.0};
    CHECK(feature_loss(Tensor::matrix(1, 3, {0, 0, 0}), Tensor::matrix(1, 3, t)).item() ==
          doctest::Approx((0.25 + 4.0 + 9.0) / 3.0));
    CHECK_THROWS_AS(feature_loss(Tensor::matrix(1, 2, {0, 0}), Tensor::matrix(1, 3, {0, 0, 0})), UsageError);
  }

  TEST_CASE("the target receives no gradient") {
    Tensor s = Tensor::matrix(1, 2, {0, 1}, true);
    Tensor t = Tensor::matrix(1, 2, {1, 3}, true);
    num::backward(feature_loss(s, t));
    CHECK(s.has_grad());
    CHECK_FALSE(t.has_grad());
  }
}

TEST_SUITE("total_loss") {
  TEST_CASE("unit coefficients sum the terms") {
    CHECK(total_loss(1, 2, 3).total == 6.0);
  }

  TEST_CASE("ablation coefficients drop terms") {
    CHECK(total_loss(1, 2, 3, {1, 0, 1}).total == 4.0);
    CHECK(total_loss(1, 2, 3, {1, 1, 0}).total == 3.0);
    const auto b = total_loss(1, 2, 3, {0.5, 2, 0.25});
    CHECK(b.total == doctest::Approx(0.5 + 4 + 0.75));
    CHECK(b.rl == 1.0);
    CHECK(b.decision == 2.0);
  }

  TEST_CASE("non-finite terms and negative coefficients are rejected") {
    CHECK_THROWS_AS(total_loss(1, NAN, 3), ParameterError);
    CHECK_THROWS_AS(total_loss(1, 2, 3, {1, -1, 1}), ParameterError);
  }

  TEST_CASE("the gradient is the weighted sum of component gradients") {
    Rng rng(18);
    for (int trial = 0; trial < 20; ++trial) {
      const auto algo = trial % 2 ? Algorithm::kPpo : Algorithm::kDqn;
      auto c = random_cohort(rng, algo, 3);
      const auto& net = c.nets[0];
      const Tensor s = testing::random_matrix(rng, 5, net.architecture().input_dim);
      const auto peers = peer_outputs(c, 0, s);
      const LossCoefficients coef{rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
      const Tensor extra = testing::random_matrix(rng, 5, net.architecture().action_count);
      // Targets are constants of the objective, so they are built once.
      const auto target = build_targets(net.forward(s), peers, AttentionMode::kDecisionAttention);
      auto terms = [&] {
        const auto out = net.forward(s);
        return std::array<Tensor, 3>{num::mean(num::square(out.decision - extra)),
                                     decision_loss(out, target, algo, 1.3), feature_loss(out.feature, target.feature)};
      };
      const auto params = net.parameters();
      auto grads_of = [&](const Tensor& l) {
        for (auto p : params) p.zero_grad();
        num::backward(l);
        std::vector<double> g;
        for (const auto& p : params) {
          const auto pg = p.grad();
          g.insert(g.end(), pg.begin(), pg.end());
        }
        return g;
      };
      const auto t = terms();
      const auto g_total = grads_of(total_loss(t[0], t[1], t[2], coef));
      const auto g0 = grads_of(terms()[0]), g1 = grads_of(terms()[1]), g2 = grads_of(terms()[2]);
      for (std::size_t i = 0; i < g_total.size(); ++i)
        CHECK(std::abs(g_total[i] - (coef.rl * g0[i] + coef.decision * g1[i] + coef.feature * g2[i])) < 1e-10);
      CHECK(num::grad_check([&] {
              const auto tt = terms();
              return total_loss(tt[0], tt[1], tt[2], coef);
            }, params, 1e-6) < 1e-4);
    }
  }
}

TEST_SUITE("build_targets and the distillation hook") {
  TEST_CASE("with two members the target is exactly the other member") {
    Rng rng(19);
    for (auto algo : {Algorithm::kDqn, Algorithm::kPpo}) {
      auto c = random_cohort(rng, algo, 2);
      const Tensor s = testing::random_matrix(rng, 6, c.nets[0].architecture().input_dim);
      const auto out = c.nets[0].forward(s);
      const auto peers = peer_outputs(c, 0, s);
      const auto t = build_targets(out, peers, AttentionMode::kDecisionAttention);
      CHECK(std::equal(t.decision.values().begin(), t.decision.values().end(), peers[0].decision.values().begin()));
      CHECK(std::equal(t.feature.values().begin(), t.feature.values().end(), peers[0].feature.values().begin()));
      if (algo == Algorithm::kPpo)
        CHECK(std::equal(t.critic.values().begin(), t.critic.values().end(), peers[0].value.values().begin()));
      for (const auto& w : t.weights) CHECK(w.weights == std::vector<double>{1.0});
    }
  }

  TEST_CASE("identical members are a fixed point with exactly zero losses") {
    Rng rng(20);
    for (auto algo : {Algorithm::kDqn, Algorithm::kPpo}) {
      policy::Architecture a;
      auto c = random_cohort(rng, algo, 1, &a);
      c.nets.push_back(c.nets[0]);
      c.nets.push_back(c.nets[0]);
      const Tensor s = testing::random_matrix(rng, 8, a.input_dim);
      const auto out = c.nets[0].forward(s);
      const auto t = build_targets(out, peer_outputs(c, 0, s), AttentionMode::kDecisionAttention);
      CHECK(decision_loss(out, t, algo, 1.0).item() == 0.0);
      CHECK(decision_loss(out, t, algo, 2.5).item() == 0.0);
      CHECK(feature_loss(out.feature, t.feature).item() == 0.0);
    }
  }

  TEST_CASE("peers receive no gradient and frozen copies give the same student gradient") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
      const auto algo = trial % 2 ? Algorithm::kPpo : Algorithm::kDqn;
      auto live = random_cohort(rng, algo, 3);
      Cohort frozen;
      frozen.nets.push_back(live.nets[0]);
      for (std::size_t j = 1; j < 3; ++j) frozen.nets.push_back(live.nets[j]);  // deep copies
      const Tensor s = testing::random_matrix(rng, 5, live.nets[0].architecture().input_dim);
      CohortOptions opts;
      auto student_grad = [&](Cohort& c) {
        auto hook = make_distillation_hook(c.ptrs(), 0, opts);
        for (auto p : c.nets[0].parameters()) p.zero_grad();
        const auto out = c.nets[0].forward(s);
        rl::LossTerms terms;
        num::backward(hook(out, s, Tensor::scalar(0.0), terms));
        std::vector<double> g;
        for (const auto& p : c.nets[0].parameters()) {
          const auto pg = p.grad();
          g.insert(g.end(), pg.begin(), pg.end());
        }
        return g;
      };
      const auto g_live = student_grad(live);
      for (std::size_t j = 1; j < 3; ++j)
        for (const auto& p : live.nets[j].parameters()) CHECK_FALSE(p.has_grad());
      CHECK(g_live == student_grad(frozen));

      // Perturbing a peer moves the targets.
      const auto before = build_targets(live.nets[0].forward(s), peer_outputs(live, 0, s), opts.attention);
      auto flat = live.nets[1].flat_parameters();
      for (double& v : flat) v += 0.05;
      live.nets[1].set_flat_parameters(flat);
      const auto after = build_targets(live.nets[0].forward(s), peer_outputs(live, 0, s), opts.attention);
      CHECK_FALSE(std::equal(before.decision.values().begin(), before.decision.values().end(),
                             after.decision.values().begin()));
    }
  }

  TEST_CASE("attention targets differ from equal-weight targets when scores differ") {
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
      auto c = random_cohort(rng, trial % 2 ? Algorithm::kPpo : Algorithm::kDqn, 3);
      const Tensor s = testing::random_matrix(rng, 6, c.nets[0].architecture().input_dim);
      const auto out = c.nets[0].forward(s);
      const auto peers = peer_outputs(c, 0, s);
      const auto att = build_targets(out, peers, AttentionMode::kDecisionAttention);
      const auto eq = build_targets(out, peers, AttentionMode::kEqualWeights);
      const std::size_t p = out.decision.cols();
      for (std::size_t r = 0; r < 6; ++r) {
        for (double w : eq.weights[r].weights) CHECK(w == 0.5);
        double s1 = 0, s2 = 0;
        for (std::size_t k = 0; k < p; ++k) {
          s1 += out.decision.at(r, k) * peers[0].decision.at(r, k);
          s2 += out.decision.at(r, k) * peers[1].decision.at(r, k);
        }
        if (s1 == s2) continue;
        bool differs = false;
        for (std::size_t k = 0; k < p; ++k) differs = differs || att.decision.at(r, k) != eq.decision.at(r, k);
        CHECK(differs);
      }
    }
  }

  TEST_CASE("zero distillation coefficients return the RL loss untouched") {
    Rng rng(23);
    auto c = random_cohort(rng, Algorithm::kDqn, 3);
    CohortOptions opts;
    opts.coefficients = {1.0, 0.0, 0.0};
    auto hook = make_distillation_hook(c.ptrs(), 1, opts);
    const Tensor s = testing::random_matrix(rng, 4, c.nets[1].architecture().input_dim);
    const auto out = c.nets[1].forward(s);
    const Tensor rl = num::mean(num::square(out.decision));
    rl::LossTerms terms;
    const Tensor total = hook(out, s, rl, terms);
    CHECK(total.node() == rl.node());
    CHECK(terms.decision == 0.0);
    CHECK(terms.feature == 0.0);
  }

  TEST_CASE("the pairwise KL diagnostic is zero for identical members") {
    Rng rng(24);
    policy::Architecture a;
    auto c = random_cohort(rng, Algorithm::kPpo, 1, &a);
    c.nets.push_back(c.nets[0]);
    const Tensor s = testing::random_matrix(rng, 4, a.input_dim);
    CHECK(mean_pairwise_kl(c.ptrs(), 0, s, 1.0) == 0.0);
    c.nets[1] = PolicyNetwork::init(a, 999);
    CHECK(mean_pairwise_kl(c.ptrs(), 0, s, 1.0) > 0.0);
  }
}

TEST_SUITE("train_cohort") {
  rl::TrainOptions small(Algorithm algo) {
    rl::TrainOptions o;
    o.algorithm = algo;
    o.env_id = algo == Algorithm::kDqn ? "catch" : "cartpole";
    o.hidden = {16, 16};
    o.budget = algo == Algorithm::kDqn ? 600 : 1024;
    o.eval_interval = 300;
    o.eval_episodes = 3;
    o.dqn.warmup = 100;
    o.ppo.rollout = 256;
    o.ppo.minibatch = 64;
    o.ppo.epochs = 2;
    return o;
  }

  TEST_CASE("fewer than two members is a configuration error") {
    CohortOptions o;
    o.train = small(Algorithm::kDqn);
    o.members = 1;
    CHECK_THROWS_AS(train_cohort(o, 0), ConfigError);
  }

  TEST_CASE("mismatched architectures are configuration errors") {
    policy::Architecture a;
    a.input_dim = 3;
    a.hidden = {4};
    a.action_count = 2;
    auto b = a;
    b.hidden = {5};
    const auto n1 = PolicyNetwork::init(a, 0), n2 = PolicyNetwork::init(b, 0);
    CHECK_THROWS_AS(validate_cohort({&n1, &n2}), ConfigError);
    CHECK_NOTHROW(validate_cohort({&n1, &n1}));
  }

  TEST_CASE("logs cover every member at every evaluation point") {
    for (auto algo : {Algorithm::kDqn, Algorithm::kPpo}) {
      CohortOptions o;
      o.train = small(algo);
      const auto r = train_cohort(o, 4);
      CHECK(r.members.size() == 3);
      REQUIRE(!r.log.empty());
      CHECK(r.log.size() % 3 == 0);
      for (std::size_t i = 0; i < r.log.size(); ++i) {
        CHECK(r.log[i].member == i % 3);
        CHECK(std::isfinite(r.log[i].loss_decision));
        CHECK(r.log[i].mean_pairwise_kl >= 0.0);
      }
      CHECK(r.log.back().loss_decision > 0.0);
    }
  }

  TEST_CASE("PPO with zero distillation weights reproduces independent training") {
    CohortOptions o;
    o.train = small(Algorithm::kPpo);
    o.members = 2;
    o.coefficients = {1.0, 0.0, 0.0};
    const std::uint64_t seed = 6;
    const auto cohort = train_cohort(o, seed);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto solo = rl::train_independent(o.train, seed, member_seed(seed, i));
      CHECK(solo.net.flat_parameters() == cohort.members[i].flat_parameters());
      std::vector<double> cohort_returns, solo_returns;
      for (const auto& e : cohort.log)
        if (e.member == i) cohort_returns.push_back(e.eval_return_mean);
      for (const auto& e : solo.log) solo_returns.push_back(e.mean_return);
      CHECK(cohort_returns == solo_returns);
    }
  }

  TEST_CASE("a run is deterministic in its seed") {
    CohortOptions o;
    o.train = small(Algorithm::kDqn);
    const auto a = train_cohort(o, 8), b = train_cohort(o, 8);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
      CHECK(a.log[i].eval_return_mean == b.log[i].eval_return_mean);
      CHECK(a.log[i].loss_feature == b.log[i].loss_feature);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.members[i].flat_parameters() == b.members[i].flat_parameters());
  }

  TEST_CASE("members start from distinct seeds") {
    CHECK(member_seed(5, 0) == 5);
    CHECK(member_seed(5, 1) != member_seed(5, 2));
    CHECK(member_seed(5, 1) != 5);
  }
}
