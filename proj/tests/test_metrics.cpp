#include <random>

#include "svgen/metrics.hpp"

// torch defines its own CHECK
#undef CHECK
#include <doctest.h>

using namespace svgen;

namespace {

Eigen::MatrixXd gaussian(int n, int d, double mean0, double sd, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = sd * g(rng) + (j == 0 ? mean0 : 0.0);
  }
  return x;
}

TokenizedSample with_codes(const std::string& label, const std::vector<int64_t>& codes) {
  TokenizedSample s{"id", label, label, 1, {}};
  for (auto c : codes) s.pairs.push_back({{0, 0}, c});
  return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("mse against a direct loop") {
  CHECK(mse(torch::ones({3, 8, 8}), torch::ones({3, 8, 8})) == 0.0);
  CHECK(mse(torch::zeros({3, 8, 8}), torch::ones({3, 8, 8})) == 1.0);
  auto a = torch::rand({3, 16, 16}, torch::kDouble);
  auto b = a.clone();
  b.narrow(2, 0, 8) += 0.5;
  double ref = 0;
  auto pa = a.accessor<double, 3>();
  auto pb = b.accessor<double, 3>();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) ref += (pa[c][y][x] - pb[c][y][x]) * (pa[c][y][x] - pb[c][y][x]);
  ref /= 3 * 16 * 16;
  CHECK(mse(a, b) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(ref == doctest::Approx(0.125));
  CHECK_THROWS_AS(mse(a, torch::ones({3, 8, 8})), std::invalid_argument);
}

TEST_CASE("fid closed forms") {
  const auto x = gaussian(2000, 6, 0.0, 1.0, 1);
  CHECK(std::abs(fid(x, x)) < 1e-6);
  const auto y = gaussian(10000, 1, 0.0, 1.0, 2);
  const auto z = gaussian(10000, 1, 1.5, 1.0, 3);
  CHECK(fid(y, z) == doctest::Approx(2.25).epsilon(0.05));
  CHECK(fid(y, z) == doctest::Approx(fid(z, y)).epsilon(1e-9));
  // equal means, standard deviations 1 and 2: (1 - 2)^2 per dimension
  const auto w = gaussian(10000, 3, 0.0, 2.0, 4);
  const auto v = gaussian(10000, 3, 0.0, 1.0, 5);
  CHECK(fid(v, w) == doctest::Approx(3.0).epsilon(0.05));
  CHECK(fid(v, w) >= 0.0);
}

TEST_CASE("clip score") {
  Eigen::MatrixXd a(3, 2), b(3, 2);
  a << 1, 0, 1, 0, 1, 0;
  b << 2, 0, 0, 1, -1, 0;
  Eigen::MatrixXd one(1, 2);
  one << 1, 0;
  CHECK(clip_score(one, one) == doctest::Approx(100.0));
  Eigen::MatrixXd orth(1, 2), anti(1, 2);
  orth << 0, 3;
  anti << -1, 0;
  CHECK(clip_score(one, orth) == doctest::Approx(0.0));
  CHECK(clip_score(one, anti) == 0.0);
  CHECK(clip_score(a, b) == doctest::Approx(100.0 / 3));
}

TEST_CASE("random projection embedding is deterministic") {
  RandomProjectionEmbedding e1(32, 7), e2(32, 7);
  const auto imgs = torch::rand({4, 3, 64, 64});
  const auto f1 = e1.embed_images(imgs);
  CHECK(f1.rows() == 4);
  CHECK(f1.cols() == 32);
  CHECK(f1.isApprox(e2.embed_images(imgs)));
  const auto t = e1.embed_texts({"box", "circle", "box"});
  CHECK(t.row(0).isApprox(t.row(2)));
  CHECK_FALSE(t.row(0).isApprox(t.row(1)));
}

TEST_CASE("codebook usage") {
  auto u = codebook_usage({with_codes("a", std::vector<int64_t>(20, 0))});
  CHECK(u.used == 1);
  CHECK(u.used_fraction() == doctest::Approx(1.0 / 4375));
  CHECK(u.top_k_share.at(1) == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  std::vector<int64_t> codes;
  for (int i = 0; i < 10000; ++i) codes.push_back(static_cast<int64_t>(rng() % 10));
  std::vector<int64_t> half(codes.begin(), codes.begin() + 5000);
  std::vector<int64_t> rest(codes.begin() + 5000, codes.end());
  u = codebook_usage({with_codes("a", half), with_codes("b", rest)});
  CHECK(u.total == 10000);
  int64_t sum = 0;
  for (auto c : u.counts) sum += c;
  CHECK(sum == u.total);
  for (int c = 0; c < 10; ++c) CHECK(static_cast<double>(u.counts[c]) / u.total == doctest::Approx(0.1).epsilon(0.1));
  CHECK(u.top_k_share.at(10) == doctest::Approx(1.0));
  CHECK(u.per_class.size() == 2);

  const auto j = u.to_json();
  double shares = 0;
  for (const auto& c : j["codes"]) shares += c["share"].get<double>();
  CHECK(shares == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
