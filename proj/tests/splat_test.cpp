#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "numcore/ops.hpp"
#include "numcore/rng.hpp"
#include "splat/rasterize_op.hpp"
#include "splat/splat.hpp"

using namespace spwm;
using namespace spwm::splat;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;

namespace {

CameraModel axis_camera(double fx = 100, double fy = 100) {
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 32;
  cam.cy = 32;
  cam.width = 64;
  cam.height = 64;
  cam.R = Mat3::identity();  // world == camera frame
  cam.tvec = {};
  return cam;
}

GaussianPrimitive random_prim(Rng& rng, double smin = 0.08, double smax = 0.6) {
  GaussianPrimitive g;
  const double z = rng.uniform(2.0, 10.0);
  g.center = {rng.uniform(-0.4, 0.4) * z, rng.uniform(-0.4, 0.4) * z, z};
  g.qw = rng.normal();
  g.qx = rng.normal();
  g.qy = rng.normal();
  g.qz = rng.normal();
  const double n = std::sqrt(g.qw * g.qw + g.qx * g.qx + g.qy * g.qy + g.qz * g.qz);
  g.qw /= n;
  g.qx /= n;
  g.qy /= n;
  g.qz /= n;
  g.scale = {rng.uniform(smin, smax), rng.uniform(smin, smax), rng.uniform(smin, smax)};
  g.opacity = rng.uniform(0.2, 0.9);
  g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
  return g;
}

std::vector<GaussianPrimitive> random_scene(Rng& rng, int n, double smin = 0.08,
                                            double smax = 0.6) {
  std::vector<GaussianPrimitive> prims;
  for (int i = 0; i < n; ++i) prims.push_back(random_prim(rng, smin, smax));
  return prims;
}

}  // namespace

TEST_CASE("projection: isotropic gaussian on the optical axis") {
  CameraModel cam = axis_camera();
  const double s = 0.25;
  TGauss<double> g;
  g.p[0] = 0;
  g.p[1] = 0;
  g.p[2] = 5;
  g.q[0] = 1;
  g.q[1] = g.q[2] = g.q[3] = 0;
  g.s[0] = g.s[1] = g.s[2] = s;
  g.alpha = 0.5;
  g.color[0] = g.color[1] = g.color[2] = 1;
  SplatConfig cfg;
  auto sp = project_gaussian_t(g, cam, cfg, 0);
  REQUIRE(!sp.culled);
  CHECK(sp.mean[0] == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(sp.mean[1] == doctest::Approx(32.0).epsilon(1e-12));
  const double expect = (100.0 / 5.0) * (100.0 / 5.0) * s * s + 0.3;
  CHECK(sp.cov[0] == doctest::Approx(expect).epsilon(1e-10));
  CHECK(sp.cov[2] == doctest::Approx(expect).epsilon(1e-10));
  CHECK(std::fabs(sp.cov[1]) < 1e-10);
}

TEST_CASE("projection: primitive behind the camera is culled") {
  CameraModel cam = axis_camera();
  TGauss<double> g;
  g.p[0] = 0;
  g.p[1] = 0;
  g.p[2] = -1;
  g.q[0] = 1;
  g.q[1] = g.q[2] = g.q[3] = 0;
  g.s[0] = g.s[1] = g.s[2] = 0.2;
  g.alpha = 0.5;
  SplatConfig cfg;
  CHECK(project_gaussian_t(g, cam, cfg, 0).culled);
}

TEST_CASE("projection: cov2d matches a finite-difference Jacobian oracle") {
  CameraModel cam = axis_camera(80, 90);
  Rng rng(17);
  SplatConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    GaussianPrimitive gp = random_prim(rng);
    TGauss<double> g;
    g.p[0] = gp.center.x;
    g.p[1] = gp.center.y;
    g.p[2] = gp.center.z;
    g.q[0] = gp.qw;
    g.q[1] = gp.qx;
    g.q[2] = gp.qy;
    g.q[3] = gp.qz;
    g.s[0] = gp.scale.x;
    g.s[1] = gp.scale.y;
    g.s[2] = gp.scale.z;
    g.alpha = gp.opacity;
    auto sp = project_gaussian_t(g, cam, cfg, 0);
    if (sp.culled) continue;

    // numeric Jacobian of world point -> pixel around the mean
    auto proj = [&](Vec3 p) {
      const Vec3 c = cam.to_camera(p);
      return std::array<double, 2>{cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy};
    };
    const double h = 1e-5;
    double jn[2][3];
    for (int j = 0; j < 3; ++j) {
      Vec3 dp = gp.center, dm = gp.center;
      (j == 0 ? dp.x : j == 1 ? dp.y : dp.z) += h;
      (j == 0 ? dm.x : j == 1 ? dm.y : dm.z) -= h;
      const auto up = proj(dp), um = proj(dm);
      jn[0][j] = (up[0] - um[0]) / (2 * h);
      jn[1][j] = (up[1] - um[1]) / (2 * h);
    }
    // cov_num = Jn Sigma_world Jn^T + reg I
    const Mat3 rq = quat_to_mat(gp.qw, gp.qx, gp.qy, gp.qz);
    Mat3 sig;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) {
          const double sk = k == 0 ? gp.scale.x : k == 1 ? gp.scale.y : gp.scale.z;
          s += rq(i, k) * sk * sk * rq(j, k);
        }
        sig(i, j) = s;
      }
    double cov_num[3] = {cfg.cov_reg, 0, cfg.cov_reg};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        cov_num[0] += jn[0][a] * sig(a, b) * jn[0][b];
        cov_num[1] += jn[0][a] * sig(a, b) * jn[1][b];
        cov_num[2] += jn[1][a] * sig(a, b) * jn[1][b];
      }
    for (int k = 0; k < 3; ++k) {
      const double denom = std::max(1e-6, std::fabs(cov_num[k]));
      CHECK(std::fabs(sp.cov[k] - cov_num[k]) / denom < 1e-4);
    }
  }
}

TEST_CASE("rasterize: empty scene gives pure background") {
  CameraModel cam = axis_camera();
  SplatConfig cfg;
  cfg.background = {0.2, 0.4, 0.6};
  auto out = rasterize_tiled(std::vector<GaussianPrimitive>{}, cam, cfg);
  for (int i = 0; i < cam.width * cam.height; ++i) {
    CHECK(out.rgba[static_cast<size_t>(i) * 4 + 0] == 0.2);
    CHECK(out.rgba[static_cast<size_t>(i) * 4 + 1] == 0.4);
    CHECK(out.rgba[static_cast<size_t>(i) * 4 + 2] == 0.6);
    CHECK(out.rgba[static_cast<size_t>(i) * 4 + 3] == 1.0);
  }
}

TEST_CASE("rasterize: single centered gaussian composites alpha*color") {
  CameraModel cam = axis_camera();
  GaussianPrimitive g;
  g.center = {0, 0, 5};  // projects exactly to pixel (32,32)
  g.scale = {0.3, 0.3, 0.3};
  g.opacity = 0.8;
  g.color = {1, 0, 0};
  SplatConfig cfg;  // black background
  auto out = rasterize_tiled({g}, cam, cfg);
  const size_t pi = (32 * 64 + 32) * 4;
  CHECK(out.rgba[pi + 0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(out.rgba[pi + 1] == 0.0);
  CHECK(out.rgba[pi + 2] == 0.0);
  CHECK(out.rgba[pi + 3] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("rasterize: tiled equals reference on non-boundary pixels") {
  SplatConfig cfg;
  cfg.background = {0.1, 0.1, 0.1};
  SplatConfig nocut = cfg;
  nocut.cutoffs = false;
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed);
    CameraModel cam = axis_camera(60, 60);
    cam.width = cam.height = 32;
    cam.cx = cam.cy = 16;
    // small footprints keep a useful fraction of pixels outside every
    // splat's cutoff annulus, so the agreeing set is non-trivial
    auto prims = random_scene(rng, 15 + static_cast<int>(rng.uniform_int(25)), 0.03, 0.12);
    auto tiled = rasterize_tiled(prims, cam, cfg);
    auto ref = rasterize_reference(prims, cam, cfg);
    auto ref_nc = rasterize_reference(prims, cam, nocut);
    int compared = 0;
    for (int i = 0; i < cam.width * cam.height; ++i) {
      bool boundary = false;
      for (int c = 0; c < 3; ++c)
        if (std::fabs(ref.rgba[static_cast<size_t>(i) * 4 + c] -
                      ref_nc.rgba[static_cast<size_t>(i) * 4 + c]) > 1e-6)
          boundary = true;
      if (boundary) continue;
      compared++;
      for (int c = 0; c < 4; ++c)
        CHECK(std::fabs(tiled.rgba[static_cast<size_t>(i) * 4 + c] -
                        ref.rgba[static_cast<size_t>(i) * 4 + c]) < 1e-9);
    }
    CHECK(compared > 0);
  }
}

TEST_CASE("rasterize_reference: permuting primitive order leaves output unchanged") {
  Rng rng(9);
  CameraModel cam = axis_camera();
  auto prims = random_scene(rng, 25);
  SplatConfig cfg;
  auto base = rasterize_reference(prims, cam, cfg);
  std::vector<GaussianPrimitive> perm;
  for (size_t i = 0; i < prims.size(); ++i) perm.push_back(prims[(i * 7 + 3) % prims.size()]);
  auto permuted = rasterize_reference(perm, cam, cfg);
  double maxdiff = 0;
  for (size_t i = 0; i < base.rgba.size(); ++i)
    maxdiff = std::max(maxdiff, std::fabs(base.rgba[i] - permuted.rgba[i]));
  CHECK(maxdiff < 1e-12);
}

TEST_CASE("rasterize: transmittance is non-increasing and pixels stay in [0,1]") {
  Rng rng(13);
  CameraModel cam = axis_camera();
  auto prims = random_scene(rng, 60);
  SplatConfig cfg;
  cfg.background = {0.3, 0.3, 0.3};
  auto out = rasterize_tiled(prims, cam, cfg);
  for (size_t i = 0; i < out.rgba.size(); i += 4) {
    for (int c = 0; c < 3; ++c) {
      CHECK(out.rgba[i + c] >= 0.0);
      CHECK(out.rgba[i + c] <= 1.0 + 1e-12);
    }
    CHECK(out.rgba[i + 3] >= 0.0);
    CHECK(out.rgba[i + 3] <= 1.0);
  }
}

namespace {

struct SceneTensors {
  Tensor centers, quats, scales, opac, colors;
};

SceneTensors scene_tensors(const std::vector<GaussianPrimitive>& prims) {
  PackedPrims p = pack(prims);
  const int n = static_cast<int>(prims.size());
  return {Tensor({n, 3}, p.centers), Tensor({n, 4}, p.quats), Tensor({n, 3}, p.scales),
          Tensor({n}, p.opacities), Tensor({n, 3}, p.colors)};
}

}  // namespace

TEST_CASE("rasterize_op: forward equals rasterize_tiled and reference AD replay") {
  Rng rng(23);
  CameraModel cam = axis_camera(60, 60);
  cam.width = cam.height = 16;
  cam.cx = cam.cy = 8;
  auto prims = random_scene(rng, 8);
  SplatConfig cfg;
  cfg.background = {0.15, 0.2, 0.25};
  auto st = scene_tensors(prims);
  Tensor out = rasterize_op(st.centers, st.quats, st.scales, st.opac, st.colors, cam, cfg);
  auto tiled = rasterize_tiled(prims, cam, cfg);
  for (size_t i = 0; i < tiled.rgba.size(); ++i) CHECK(out.values()[i] == tiled.rgba[i]);

  Tensor ad = rasterize_reference_ad(st.centers, st.quats, st.scales, st.opac, st.colors, cam, cfg);
  double maxdiff = 0;
  for (size_t i = 0; i < tiled.rgba.size(); ++i)
    maxdiff = std::max(maxdiff, std::fabs(ad.values()[i] - tiled.rgba[i]));
  CHECK(maxdiff < 1e-12);
}

TEST_CASE("rasterize_op: hand-derived backward equals autodiff through reference") {
  Rng rng(29);
  CameraModel cam = axis_camera(60, 60);
  cam.width = cam.height = 16;
  cam.cx = cam.cy = 8;
  auto prims = random_scene(rng, 8);
  SplatConfig cfg;
  cfg.background = {0.1, 0.1, 0.2};
  auto st = scene_tensors(prims);
  // fixed random pixel weighting so every channel contributes
  Tensor pixw({16, 16, 4}, rng.uniform_vec(16 * 16 * 4, -1.0, 1.0));

  auto run = [&](bool use_op) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor c = tape.leaf(st.centers), q = tape.leaf(st.quats), s = tape.leaf(st.scales),
           o = tape.leaf(st.opac), col = tape.leaf(st.colors);
    Tensor img = use_op ? rasterize_op(c, q, s, o, col, cam, cfg)
                        : rasterize_reference_ad(c, q, s, o, col, cam, cfg);
    Tensor loss = numcore::reduce_sum(numcore::mul(img, pixw));
    tape.backward(loss);
    std::vector<std::vector<double>> grads = {tape.grad(c), tape.grad(q), tape.grad(s),
                                              tape.grad(o), tape.grad(col)};
    return grads;
  };
  auto g_op = run(true), g_ad = run(false);
  for (size_t k = 0; k < g_op.size(); ++k) {
    REQUIRE(g_op[k].size() == g_ad[k].size());
    for (size_t i = 0; i < g_op[k].size(); ++i) {
      const double denom = std::max(1e-6, std::fabs(g_op[k][i]) + std::fabs(g_ad[k][i]));
      CHECK(std::fabs(g_op[k][i] - g_ad[k][i]) / denom < 1e-8);
    }
  }
}

TEST_CASE("rasterize_op: gradients match finite differences") {
  Rng rng(31);
  CameraModel cam = axis_camera(60, 60);
  cam.width = cam.height = 16;
  cam.cx = cam.cy = 8;
  auto prims = random_scene(rng, 6);
  SplatConfig cfg;
  cfg.background = {0.1, 0.15, 0.2};
  auto st = scene_tensors(prims);
  numcore::ParamSet params;
  params.add("centers", st.centers);
  params.add("quats", st.quats);
  params.add("scales", st.scales);
  params.add("opacities", st.opac);
  params.add("colors", st.colors);
  Tensor pixw({16, 16, 4}, rng.uniform_vec(16 * 16 * 4, -1.0, 1.0));
  auto loss_fn = [&]() {
    Tensor img = rasterize_op(params.find("centers")->leaf, params.find("quats")->leaf,
                              params.find("scales")->leaf, params.find("opacities")->leaf,
                              params.find("colors")->leaf, cam, cfg);
    return numcore::reduce_sum(numcore::mul(img, pixw));
  };
  Rng pick(3);
  auto res = testutil::gradcheck(params, loss_fn, 96, pick);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("reference AD: opacity gradient of mean intensity matches finite differences") {
  Rng rng(37);
  CameraModel cam = axis_camera(60, 60);
  cam.width = cam.height = 12;
  cam.cx = cam.cy = 6;
  auto prims = random_scene(rng, 5);
  SplatConfig cfg;
  auto st = scene_tensors(prims);

  Tape tape;
  double analytic;
  {
    Tape::Scope scope(tape);
    Tensor o = tape.leaf(st.opac);
    Tensor img = rasterize_reference_ad(st.centers, st.quats, st.scales, o, st.colors, cam, cfg);
    Tensor rgb = numcore::slice_cols(numcore::reshape(img, {12 * 12, 4}), 0, 3);
    Tensor loss = numcore::reduce_mean(rgb);
    tape.backward(loss);
    analytic = tape.grad(o)[2];
  }
  const double h = 1e-6;
  auto eval = [&](double delta) {
    auto pr = prims;
    pr[2].opacity += delta;
    auto out = rasterize_reference(pr, cam, cfg);
    double s = 0;
    for (size_t i = 0; i < out.rgba.size(); i += 4) s += out.rgba[i] + out.rgba[i + 1] + out.rgba[i + 2];
    return s / (12 * 12 * 3);
  };
  const double fd = (eval(h) - eval(-h)) / (2 * h);
  CHECK(std::fabs(analytic - fd) / std::max(1e-6, std::fabs(fd)) < 1e-5);
}

TEST_CASE("render_depth: on-axis gaussian reports its depth") {
  CameraModel cam = axis_camera();
  GaussianPrimitive g;
  g.center = {0, 0, 5};
  g.scale = {0.5, 0.5, 0.5};
  g.opacity = 0.95;
  g.color = {1, 1, 1};
  SplatConfig cfg;
  auto dm = render_depth({g}, cam, cfg);
  const size_t pi = 32 * 64 + 32;
  REQUIRE(dm.valid[pi] == 1);
  CHECK(dm.depth[pi] == doctest::Approx(5.0).epsilon(1e-9));
}
