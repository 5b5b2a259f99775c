// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scd/core/dataset.hpp"
#include "scd/core/hash.hpp"
#include "scd/core/image_io.hpp"
#include "scratch_dir.hpp"

using namespace scd;
using scd::testing::ScratchDir;

namespace {

LabeledSample random_sample(std::mt19937_64& rng, int h, int w, const std::string& id) {
  LabeledSample s;
  s.pair.t0 = testing::random_raster(rng, 3, h, w);
  s.pair.t1 = testing::random_raster(rng, 3, h, w);
  s.pair.scene_id = id;
  s.mask = testing::random_blob_mask(rng, h, w, 3);
  return s;
}

} // namespace

TEST_CASE("tensor planes are row-major views of one channel") {
  Raster r(2, 3, 4);
  r(1, 2, 3) = 7.f;
  CHECK(r.plane(1)(2, 3) == 7.f);
  CHECK(r.data(1, 2 * 4 + 3) == 7.f);
  CHECK(r.channels() == 2);
  CHECK(r.pixels() == 12);
}

TEST_CASE("validate rejects mismatched pairs and masks") {
  std::mt19937_64 rng(1);
  LabeledSample s = random_sample(rng, 8, 8, "a");
  CHECK_NOTHROW(validate(s));
  s.mask = ChangeMask::Zero(8, 9);
  CHECK_THROWS_AS(validate(s), ShapeError);
  s.mask = ChangeMask::Zero(8, 8);
  s.mask(0, 0) = 2;
  CHECK_FALSE(is_binary(s.mask));
  s.pair.t1 = Raster(3, 8, 7);
  CHECK_THROWS_AS(validate(s.pair), ShapeError);
}

TEST_CASE("sha256 matches the published test vector") {
  Sha256 sha;
  sha.update(std::string("abc"));
  CHECK(sha.hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("derive_seed is deterministic and spreads indices") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("png round trip stays within one quantization step") {
  ScratchDir dir("png");
  std::mt19937_64 rng(3);
  const Raster img = testing::random_raster(rng, 3, 9, 13);
  io::write_png(dir / "a.png", img);
  const Raster back = io::read_rgb(dir / "a.png");
  REQUIRE(back.same_shape(img));
  CHECK((back.data - img.data).cwiseAbs().maxCoeff() <= 0.5f / 255.f + 1e-6f);
}

TEST_CASE("masks must decode to exactly 0 or 255") {
  ScratchDir dir("mask");
  Plane<float> g = Plane<float>::Zero(4, 4);
  g(1, 1) = 1.f;
  io::write_gray(dir / "ok.png", g);
  const ChangeMask m = io::read_mask(dir / "ok.png");
  CHECK(m.sum() == 1);
  g(2, 2) = 0.5f;
  io::write_gray(dir / "bad.png", g);
  CHECK_THROWS_AS(io::read_mask(dir / "bad.png"), FormatError);
  CHECK_THROWS_AS(io::read_mask(dir / "missing.png"), LoadError);
}

TEST_CASE("save_dataset then load_dataset round-trips 20 random samples") {
  ScratchDir dir("ds");
  std::mt19937_64 rng(11);
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 20; ++i) samples.push_back(random_sample(rng, 12, 16, "s" + std::to_string(i)));
  const DatasetManifest m = save_dataset(samples, dir.path());
  CHECK(m.records.size() == 20);
  const auto back = load_dataset(dir.path());
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].pair.scene_id == samples[i].pair.scene_id);
    CHECK((back[i].mask == samples[i].mask).all());
    CHECK((back[i].pair.t0.data - samples[i].pair.t0.data).cwiseAbs().maxCoeff() <= 1.f / 255.f);
    CHECK((back[i].pair.t1.data - samples[i].pair.t1.data).cwiseAbs().maxCoeff() <= 1.f / 255.f);
  }
}

TEST_CASE("empty and single-sample datasets") {
  ScratchDir dir("ds_small");
  const auto empty = save_dataset({}, dir / "empty");
  CHECK(empty.records.empty());
  CHECK(load_dataset(dir / "empty").empty());

  std::mt19937_64 rng(2);
  save_dataset({random_sample(rng, 8, 8, "only")}, dir / "one");
  CHECK(std::filesystem::exists(dir / "one" / "t0" / "only.png"));
  CHECK(std::filesystem::exists(dir / "one" / "t1" / "only.png"));
  CHECK(std::filesystem::exists(dir / "one" / "masks" / "only.png"));
  CHECK(read_manifest(dir / "one" / "manifest.json").records.size() == 1);
}

TEST_CASE("missing mask file is reported with its path") {
  ScratchDir dir("ds_missing");
  std::mt19937_64 rng(5);
  save_dataset({random_sample(rng, 8, 8, "x")}, dir.path());
  std::filesystem::remove(dir / "masks" / "x.png");
  try {
    load_dataset(dir.path());
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("x.png") != std::string::npos);
  }
}

TEST_CASE("manifest version mismatch is a version error") {
  ScratchDir dir("ds_version");
  save_dataset({}, dir.path());
  std::ofstream(dir / "manifest.json") << R"({"format_version": 99, "records": []})";
  CHECK_THROWS_AS(load_dataset(dir.path()), VersionError);
}

TEST_CASE("dataset hash depends on content only") {
  ScratchDir a("hash_a"), b("hash_b");
  std::mt19937_64 r1(9), r2(9);
  save_dataset({random_sample(r1, 8, 8, "p")}, a.path());
  save_dataset({random_sample(r2, 8, 8, "p")}, b.path());
  CHECK(dataset_hash(a.path()) == dataset_hash(b.path()));
}
