// Copyright 2026 The pointda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdlib>
#include <random>

#include "doctest.h"
#include "pointda/error.hpp"
#include "pointda/network.hpp"
#include "support.hpp"

using namespace pointda;

namespace {

Tensor random_images(int n, int h, int w, std::uint64_t seed, int channels = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(n, channels, h, w);
  for (float& v : t.values()) v = u(rng);
  return t;
}

// ||a - b|| / (||a|| + ||b||) over a sample of entries.
double vector_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / (std::sqrt(na) + std::sqrt(nb) + 1e-12);
}

// Random linear functional of the predictions, so d(loss)/d(maps) = coeffs.
struct Probe {
  std::vector<PredictionGrads> coeffs;
  double operator()(const std::vector<PredictionMaps>& maps) const {
    double s = 0;
    for (std::size_t n = 0; n < maps.size(); ++n) {
      for (std::size_t i = 0; i < maps[n].offsets.data().size(); ++i) {
        s += coeffs[n].offsets.data()[i] * maps[n].offsets.data()[i];
        s += coeffs[n].cls.data()[i] * maps[n].cls.data()[i];
      }
    }
    return s;
  }
};

}  // namespace

TEST_CASE("main network output shapes") {
  PointProposalNet net(BackboneConfig{}, 1);
  const auto maps = net.forward(random_images(2, 64, 64, 2));
  REQUIRE(maps.size() == 2);
  for (const auto& m : maps) {
    CHECK(m.offsets.width() == 8);
    CHECK(m.offsets.height() == 8);
    CHECK(m.offsets.depth() == 4);
    CHECK(m.offsets.components() == 2);
    CHECK(m.cls.same_shape(m.offsets));
  }
  // Sizes that are not a multiple of the stride still give ceil(size / s).
  const auto odd = net.forward(random_images(1, 50, 70, 3));
  CHECK(odd[0].offsets.width() == 9);
  CHECK(odd[0].offsets.height() == 7);
}

TEST_CASE("vgg-like backbone has the same output geometry") {
  BackboneConfig cfg;
  cfg.variant = BackboneVariant::vgg_like;
  cfg.channels = 16;
  PointProposalNet net(cfg, 1);
  const auto maps = net.forward(random_images(1, 64, 48, 4));
  CHECK(maps[0].offsets.width() == 6);
  CHECK(maps[0].offsets.height() == 8);
}

TEST_CASE("offsets in [-1, 1] and class pairs sum to one") {
  PointProposalNet net(BackboneConfig{}, 7);
  for (const auto& m : net.forward(random_images(2, 32, 32, 8))) {
    for (double v : m.offsets.data()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    for (std::size_t s = 0; s < m.cls.num_slots(); ++s) {
      CHECK(std::abs(m.cls.slot(s, 0) + m.cls.slot(s, 1) - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("equal logits give (0.5, 0.5)") {
  for (double a : {-30.0, 0.0, 2.5, 80.0}) {
    const auto [p, q] = softmax_pair(a, a);
    CHECK(p == 0.5);
    CHECK(q == 0.5);
  }
  const auto [p, q] = softmax_pair(1000.0, 0.0);
  CHECK(std::isfinite(p));
  CHECK(p == doctest::Approx(1.0));
  CHECK(q >= 0.0);
}

TEST_CASE("non-RGB input is rejected") {
  PointProposalNet net(BackboneConfig{}, 1);
  CHECK_THROWS_AS(net.forward(random_images(1, 32, 32, 1, 1)), InvalidInput);
  CHECK_THROWS_AS(net.forward(random_images(1, 32, 32, 1, 4)), InvalidInput);
}

TEST_CASE("backbone config validation") {
  BackboneConfig bad;
  bad.stride = 6;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  BackboneConfig shallow;
  shallow.depth = 2;  // cannot reach stride 8
  CHECK_THROWS_AS(shallow.validate(), InvalidArgument);
  CHECK(parse_backbone_variant("vgg-like") == BackboneVariant::vgg_like);
  CHECK_THROWS_AS(parse_backbone_variant("resnet"), InvalidArgument);
}

TEST_CASE("concat example and round trip") {
  PredictionMaps m{OffsetMap(1, 1, 1, 2), ClassificationMap(1, 1, 1, 2)};
  m.offsets.at(0, 0, 0, 0) = 0.5;
  m.offsets.at(0, 0, 0, 1) = -0.5;
  m.cls.at(0, 0, 0, 0) = 0.9;
  m.cls.at(0, 0, 0, 1) = 0.1;
  const Tensor t = concat_predictions({m});
  REQUIRE(t.channels() == 4);
  CHECK(t.at(0, 0, 0, 0) == 0.5f);
  CHECK(t.at(0, 1, 0, 0) == -0.5f);
  CHECK(t.at(0, 2, 0, 0) == 0.9f);
  CHECK(t.at(0, 3, 0, 0) == 0.1f);

  PointProposalNet net(BackboneConfig{BackboneVariant::tiny, 8, 16, 3, 2}, 3);
  const auto maps = net.forward(random_images(2, 24, 16, 5));
  const Tensor c = concat_predictions(maps);
  CHECK(c.channels() == 8);
  for (int n = 0; n < 2; ++n) {
    const PredictionMaps back = split_concat(c, n);
    for (std::size_t i = 0; i < back.offsets.data().size(); ++i) {
      CHECK(back.offsets.data()[i] == static_cast<double>(static_cast<float>(maps[n].offsets.data()[i])));
      CHECK(back.cls.data()[i] == static_cast<double>(static_cast<float>(maps[n].cls.data()[i])));
    }
  }
}

TEST_CASE("discriminator output contract") {
  Discriminator d(16, DiscriminatorConfig{}, 4);
  const Tensor in = random_images(2, 8, 8, 6, 16);
  const auto a = d.forward(in, Domain::target);
  REQUIRE(a.size() == 2);
  CHECK(a[0].width == d.output_size(8));
  CHECK(a[0].width == 1);
  CHECK(a[0].domain == Domain::target);
  const auto wide = d.forward(random_images(1, 16, 32, 6, 16), Domain::source);
  CHECK(wide[0].width == 2);
  CHECK(wide[0].height == 1);
  for (std::size_t c = 0; c < wide[0].num_cells(); ++c) {
    CHECK(std::abs(wide[0].probs[2 * c] + wide[0].probs[2 * c + 1] - 1.0) <= 1e-6);
  }
  const auto b = d.forward(in, Domain::target);
  CHECK(a[0].probs == b[0].probs);
  CHECK_THROWS_AS(d.forward(random_images(1, 8, 8, 6, 12), Domain::source), InvalidInput);
}

TEST_CASE("forward passes are bit-reproducible for a fixed seed") {
  PointProposalNet a(BackboneConfig{}, 99), b(BackboneConfig{}, 99);
  const Tensor x = random_images(1, 32, 32, 9);
  const auto ma = a.forward(x), mb = b.forward(x);
  CHECK(ma[0].offsets.data() == mb[0].offsets.data());
  CHECK(ma[0].cls.data() == mb[0].cls.data());
}

// ReLU and max-pool kinks make a few finite differences meaningless for any
// step size, so the network-level check asks that nearly all sampled entries
// agree rather than bounding the worst one. The layers themselves are exact.
TEST_CASE("main network parameter gradients match finite differences") {
  for (BackboneVariant variant : {BackboneVariant::tiny, BackboneVariant::vgg_like}) {
    BackboneConfig cfg{variant, 4, 8, 3, 2};
    PointProposalNet net(cfg, 12);
    const Tensor x = random_images(2, 12, 12, 13);
    auto maps = net.forward(x);
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g(0.0, 1.0);
    Probe probe;
    for (const auto& m : maps) {
      auto c = PredictionGrads::zeros_like(m);
      for (double& v : c.offsets.data()) v = g(rng);
      for (double& v : c.cls.data()) v = g(rng);
      probe.coeffs.push_back(std::move(c));
    }
    net.zero_grad();
    net.backward(probe.coeffs);
    int agree = 0, total = 0;
    for (Parameter* p : net.parameters()) {
      const std::size_t step = std::max<std::size_t>(1, p->value.size() / 24);
      for (std::size_t i = 0; i < p->value.size(); i += step) {
        const float saved = p->value[i];
        const float h = 3e-4f;
        p->value[i] = saved + h;
        const double up = probe(net.forward(x));
        p->value[i] = saved - h;
        const double down = probe(net.forward(x));
        p->value[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const bool ok = pointda::testing::rel_error(p->grad[i], numeric, 1e-3) <= 2e-2;
        if (!ok && std::getenv("GC_DEBUG")) MESSAGE(p->name, "[", i, "] ", p->grad[i], " vs ", numeric);
        agree += ok;
        ++total;
      }
    }
    INFO(std::string(to_string(variant)), ": ", agree, " of ", total, " entries agree");
    CHECK(agree >= 0.95 * total);
  }
}

TEST_CASE("discriminator input gradient matches finite differences") {
  Discriminator d(8, DiscriminatorConfig{8, 2, 0.2f}, 21);
  Tensor x = random_images(1, 8, 8, 22, 8);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  auto out = d.forward(x, Domain::source);
  std::vector<DomainMap> coeff = out;
  for (double& v : coeff[0].probs) v = g(rng);
  auto probe = [&] {
    const auto o = d.forward(x, Domain::source);
    double s = 0;
    for (std::size_t i = 0; i < o[0].probs.size(); ++i) s += coeff[0].probs[i] * o[0].probs[i];
    return s;
  };
  d.forward(x, Domain::source);
  const Tensor dx = d.backward(coeff, true);
  std::vector<double> analytic, numeric;
  for (std::size_t i = 0; i < x.values().size(); i += 7) {
    const float saved = x.values()[i];
    const float h = 1e-4f;
    x.values()[i] = saved + h;
    const double up = probe();
    x.values()[i] = saved - h;
    const double down = probe();
    x.values()[i] = saved;
    analytic.push_back(dx.values()[i]);
    numeric.push_back((up - down) / (2.0 * h));
  }
  CHECK(vector_rel_error(analytic, numeric) <= 2e-2);
}

TEST_CASE("a frozen discriminator passes input gradients but accumulates none") {
  Discriminator d(8, DiscriminatorConfig{8, 2, 0.2f}, 31);
  const Tensor x = random_images(1, 8, 8, 32, 8);
  auto out = d.forward(x, Domain::target);
  for (double& v : out[0].probs) v = 1.0;
  out[0].probs[0] = -2.0;
  d.zero_grad();
  d.set_frozen(true);
  const Tensor dx = d.backward(out, true);
  for (Parameter* p : d.parameters()) {
    for (float v : p->grad) REQUIRE(v == 0.0f);
  }
  double norm = 0;
  for (float v : dx.values()) norm += std::abs(v);
  CHECK(norm > 0.0);

  d.set_frozen(false);
  d.forward(x, Domain::target);
  d.backward(out, false);
  double pnorm = 0;
  for (Parameter* p : d.parameters()) {
    for (float v : p->grad) pnorm += std::abs(v);
  }
  CHECK(pnorm > 0.0);
}
