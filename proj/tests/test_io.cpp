#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "deepbf/io.hpp"
#include "deepbf/rng.hpp"

using namespace deepbf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("deepbf_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RFCube random_cube(std::size_t d, std::size_t r, std::size_t e, std::uint64_t seed) {
  std::vector<double> params(e);
  for (std::size_t k = 0; k < e; ++k) params[k] = 1e-4 * k;
  RFCube c(d, r, e, EventKind::FocusedTe, 1e-3, 2e-5, params);
  Rng rng(seed);
  for (double& v : c.samples()) v = rng.normal();
  return c;
}

std::vector<unsigned char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

io::DatasetManifest sample_manifest(const fs::path& dir) {
  io::DatasetManifest m;
  m.seed = 7;
  m.phantom_spec = {{"phantom.density_per_m2", "20000000"}, {"phantom.cyst_count", "1"}};
  for (int i = 0; i < 3; ++i) {
    const RFCube c = random_cube(4, 3, 2, i);
    io::FrameEntry f;
    f.file = "frame" + std::to_string(i) + ".rf";
    io::write_rf_blob(dir / f.file, c);
    f.header = io::header_of(c);
    f.byte_length = f.header.byte_length();
    f.split = i == 0 ? io::Split::Train : i == 1 ? io::Split::Val : io::Split::Test;
    f.phantom_seed = 100 + i;
    f.cysts = {{1e-3, 2e-2, 1.5e-3, 0.0}};
    m.frames.push_back(f);
  }
  return m;
}

}  // namespace

TEST(RfBlob, Float32LittleEndianLayout) {
  const fs::path dir = scratch("blob");
  const RFCube c = random_cube(3, 4, 5, 1);
  io::write_rf_blob(dir / "a.rf", c);
  const auto raw = bytes_of(dir / "a.rf");
  ASSERT_EQ(raw.size(), 4u * 60);
  // Element [d=2][r=1][e=3] sits at index (2*4 + 1)*5 + 3.
  const std::size_t idx = (2 * 4 + 1) * 5 + 3;
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[idx * 4 + b]) << (8 * b);
  float f;
  std::memcpy(&f, &bits, 4);
  EXPECT_EQ(f, static_cast<float>(c.at(2, 1, 3)));

  const RFCube back = io::read_rf_blob(dir / "a.rf", io::header_of(c));
  for (std::size_t i = 0; i < c.samples().size(); ++i)
    EXPECT_EQ(back.samples()[i], static_cast<double>(static_cast<float>(c.samples()[i])));
  EXPECT_EQ(io::header_of(back), io::header_of(c));
  io::CubeHeader big = io::header_of(c);
  big.n_depth = 4;
  EXPECT_THROW(io::read_rf_blob(dir / "a.rf", big), Error);
  EXPECT_THROW(io::read_rf_blob(dir / "a.rf", io::header_of(c), 8), Error);
}

TEST(Manifest, JsonRoundTripAndLoad) {
  const fs::path dir = scratch("manifest");
  const io::DatasetManifest m = sample_manifest(dir);
  io::write_manifest(dir / "manifest.json", m);
  const io::DatasetManifest back = io::read_manifest(dir / "manifest.json");
  EXPECT_EQ(back, m);
  EXPECT_NO_THROW(io::validate_manifest(back, dir));
  EXPECT_EQ(back.frames_in(io::Split::Val), std::vector<std::size_t>{1});
  const RFCube c = io::load_frame(back, dir, 2);
  EXPECT_EQ(c.n_depth(), 4u);
  EXPECT_EQ(c.at(1, 2, 1), static_cast<double>(static_cast<float>(random_cube(4, 3, 2, 2).at(1, 2, 1))));
  EXPECT_THROW(io::load_frame(back, dir, 3), Error);
}

TEST(Manifest, ParseErrors) {
  EXPECT_THROW(io::manifest_from_json("{"), Error);
  EXPECT_THROW(io::manifest_from_json("{}"), Error);
  io::DatasetManifest m;
  std::string text = io::manifest_to_json(m);
  const auto pos = text.find("\"format_version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 19, "\"format_version\": 2");
  EXPECT_THROW(io::manifest_from_json(text), Error);
}

TEST(Manifest, ValidationNamesTheFrame) {
  const fs::path dir = scratch("validate");
  const io::DatasetManifest good = sample_manifest(dir);
  auto expect_error = [&](const io::DatasetManifest& m, const std::string& needle) {
    try {
      io::validate_manifest(m, dir);
      ADD_FAILURE() << "no error for " << needle;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  io::DatasetManifest m = good;
  m.frames[1].byte_length += 4;
  expect_error(m, "frames[1].byte_length");
  m = good;
  m.frames[2].file = "nope.rf";
  expect_error(m, "frames[2].file missing");
  m = good;
  m.frames[0].offset = 8;
  expect_error(m, "frames[0].file shorter");
  m = good;
  m.frames[2].file = m.frames[0].file;
  expect_error(m, "shared between splits");
  m = good;
  m.frames[0].header.event_params.pop_back();
  expect_error(m, "event_params");
  m = good;
  m.masks.push_back({"missing.mask", "rx16"});
  expect_error(m, "masks[0]");
}

TEST(Mask, FileRoundTrip) {
  const fs::path dir = scratch("mask");
  for (const SamplingMask& m : {make_focused_mask(37, 64, 24, 11), make_pw_subset(31, 7),
                                make_focused_mask(3, 5, 3, 2)}) {
    io::write_mask(dir / "m.bin", m);
    EXPECT_EQ(io::read_mask(dir / "m.bin"), m);
  }
  io::write_text(dir / "bad.bin", "NOTAMASK");
  EXPECT_THROW(io::read_mask(dir / "bad.bin"), Error);
  io::write_mask(dir / "m.bin", make_pw_subset(31, 7));
  io::append_text(dir / "m.bin", "x");
  EXPECT_THROW(io::read_mask(dir / "m.bin"), Error);
}

TEST(Checkpoint, RoundTripGivesIdenticalOutput) {
  const fs::path dir = scratch("ckpt");
  nn::Network net = nn::build_deepbf(nn::Variant::Focused, 4, 5);
  nn::Tensor4 x(2, 3, 64, 10);
  Rng rng(1);
  for (double& v : x.values()) v = rng.normal();
  net.forward(x, nn::Mode::Train);  // move the running statistics
  nn::TrainConfig cfg;
  cfg.seed = 99;
  cfg.momentum = 0.5;
  io::write_checkpoint(dir / "model.ckpt", net, cfg, 17);
  EXPECT_FALSE(fs::exists(dir / "model.ckpt.tmp"));
  io::Checkpoint ck = io::read_checkpoint(dir / "model.ckpt");
  EXPECT_EQ(ck.epochs_completed, 17);
  EXPECT_EQ(ck.train.lr_start, 1e-3);
  EXPECT_EQ(ck.train.lr_end, 1e-5);
  EXPECT_EQ(ck.train.weight_decay, 1e-4);
  EXPECT_EQ(ck.train.epochs, 200);
  EXPECT_EQ(ck.train.momentum, 0.5);
  EXPECT_EQ(ck.train.seed, 99u);
  EXPECT_EQ(ck.net.parameter_count(), net.parameter_count());
  EXPECT_EQ(ck.net.forward(x, nn::Mode::Eval), net.forward(x, nn::Mode::Eval));

  auto raw = bytes_of(dir / "model.ckpt");
  io::write_text(dir / "trunc.ckpt", std::string(raw.begin(), raw.end() - 8));
  EXPECT_THROW(io::read_checkpoint(dir / "trunc.ckpt"), Error);
  raw[8] = 9;  // version field
  io::write_text(dir / "ver.ckpt", std::string(raw.begin(), raw.end()));
  EXPECT_THROW(io::read_checkpoint(dir / "ver.ckpt"), Error);
}

TEST(Images, DbRoundTripAndPgm) {
  const fs::path dir = scratch("img");
  BModeImage img;
  img.pixels_db = Grid(3, 4, -30.0);
  img.pixels_db(0, 0) = 0.0;
  img.pixels_db(2, 3) = -60.0;
  img.pixels_db(1, 1) = -80.0;
  io::write_db_image(dir / "a.db", img);
  const BModeImage back = io::read_db_image(dir / "a.db");
  EXPECT_EQ(back.pixels_db, img.pixels_db);
  EXPECT_EQ(back.dynamic_range_db, 60.0);
  EXPECT_FALSE(back.all_zero_input);

  EXPECT_EQ(io::db_to_gray(0.0, 60), 255);
  EXPECT_EQ(io::db_to_gray(-60.0, 60), 0);
  EXPECT_EQ(io::db_to_gray(-100.0, 60), 0);
  EXPECT_EQ(io::db_to_gray(3.0, 60), 255);
  EXPECT_THROW(io::db_to_gray(0.0, 0.0), Error);

  io::write_pgm(dir / "a.pgm", img);
  const auto [rows, cols, gray] = io::read_pgm(dir / "a.pgm");
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(cols, 4u);
  EXPECT_EQ(gray[0], 255);
  EXPECT_EQ(gray[11], 0);
  EXPECT_EQ(gray[5], 0);
  EXPECT_EQ(gray[1], io::db_to_gray(-30.0, 60));
  EXPECT_EQ(io::read_text(dir / "a.pgm").substr(0, 2), "P5");
}

TEST(Reports, CsvFormats) {
  EXPECT_EQ(io::format_metric(INFINITY), "inf");
  EXPECT_EQ(io::format_metric(-INFINITY), "-inf");
  EXPECT_EQ(io::format_metric(NAN), "nan");
  EXPECT_EQ(io::format_metric(1.5), "1.500000");
  MetricRow a{"1", "das", 2.0, 0.5, INFINITY, 1.0, true};
  MetricRow b{"16", "deepbf", 0, 0, 20.0, 0.25, false};
  EXPECT_EQ(io::metrics_csv({a, b}),
            "factor,method,cnr,gcnr,psnr,ssim\n"
            "1,das,2.000000,0.500000,inf,1.000000\n"
            "16,deepbf,,,20.000000,0.250000\n");
  nn::TrainConfig cfg;
  cfg.epochs = 2;
  const std::string csv = io::loss_csv({0.5, 0.25}, {}, cfg);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,lr,train_loss,val_loss");
  EXPECT_NE(csv.find("\n0,0.001,0.5,\n"), std::string::npos);
  EXPECT_NE(csv.find("\n1,1e-05,0.25,\n"), std::string::npos);
  EXPECT_NE(io::loss_csv({0.5}, {0.75}, cfg).find("0.5,0.75"), std::string::npos);
}

TEST(DirLock, ExcludesSecondHolder) {
  const fs::path dir = scratch("lock") / "out";
  {
    io::DirLock a(dir);
    EXPECT_TRUE(fs::exists(dir / io::DirLock::kFileName));
    EXPECT_THROW(io::DirLock b(dir), Error);
  }
  EXPECT_FALSE(fs::exists(dir / io::DirLock::kFileName));
  EXPECT_NO_THROW(io::DirLock c(dir));
}
