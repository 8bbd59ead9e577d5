#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <cellscope/error.hpp>
#include <cellscope/image.hpp>
#include <cellscope/ingestion.hpp>
#include <cellscope/manifest.hpp>

#include "oracles.hpp"

using namespace cellscope;
using cellscope::testing::max_center_error;
using cellscope::testing::stamp_disk;
namespace fs = std::filesystem;

namespace {

const char* kManifest = R"({
  "node": {"name": "40nm", "unit_length_nm": 40, "matching_radius": 0.5, "pixels_per_unit": 10},
  "tiles": [{"tile_id": "t0", "image_path": "tiles/t0.png"}],
  "cell_types": [
    {"type_id": "NAND2_X1", "function_class": "NAND2", "width": 6, "height": 5},
    {"type_id": "NOR2_X1", "function_class": "NOR2", "width": 6, "height": 5}
  ],
  "instances": [
    {"instance_id": "u1", "type_id": "NAND2_X1", "tile_id": "t0", "bbox": [10, 10, 60, 50], "orientation": "R0"},
    {"instance_id": "u2", "type_id": "NOR2_X1", "tile_id": "t0", "bbox": [90, 10, 60, 50], "orientation": "MX"}
  ]
})";

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cellscope_ingest_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ManifestError::Kind error_kind(const std::string& text) {
  try {
    parse_manifest(text);
  } catch (const ManifestError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "manifest parsed without error";
  return ManifestError::Kind::MissingFile;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST(Manifest, ParsesEveryField) {
  const auto m = parse_manifest(kManifest, "/data/run");
  EXPECT_EQ(m.node.name, "40nm");
  EXPECT_EQ(m.node.pixels_per_unit, 10);
  ASSERT_EQ(m.instances.size(), 2u);
  EXPECT_EQ(m.instance("u2").orientation, Orientation::MX);
  EXPECT_EQ(m.instance("u2").bbox, (PixelBox{90, 10, 60, 50}));
  EXPECT_EQ(m.cell_type("NOR2_X1").function_class, "NOR2");
  EXPECT_EQ(m.tile_path("t0"), fs::path("/data/run/tiles/t0.png"));
}

TEST(Manifest, RoundTripsThroughCanonicalJson) {
  const auto m = parse_manifest(kManifest);
  const auto text = serialize_manifest(m);
  EXPECT_EQ(serialize_manifest(parse_manifest(text)), text);
}

TEST(Manifest, ErrorKinds) {
  using K = ManifestError::Kind;
  EXPECT_EQ(error_kind("{not json"), K::Schema);
  EXPECT_EQ(error_kind(replace(kManifest, R"("width": 6, "height": 5},
    {"type_id": "NOR2_X1")", R"("width": 0, "height": 5},
    {"type_id": "NOR2_X1")")),
            K::Schema);
  EXPECT_EQ(error_kind(replace(kManifest, R"("orientation": "MX")", R"("orientation": "R90")")), K::Schema);
  EXPECT_EQ(error_kind(replace(kManifest, R"("bbox": [90, 10, 60, 50])", R"("bbox": [90, 10, 60])")), K::Schema);
  EXPECT_EQ(error_kind(replace(kManifest, R"("tiles": [)", R"("extra": 1, "tiles": [)")), K::Schema);
  EXPECT_EQ(error_kind(replace(kManifest, R"("matching_radius": 0.5)", R"("matching_radius": 0.4)")), K::Schema);
  EXPECT_EQ(error_kind(replace(kManifest, R"("instance_id": "u2")", R"("instance_id": "u1")")), K::DuplicateId);
  EXPECT_EQ(error_kind(replace(kManifest, R"("type_id": "NOR2_X1", "tile_id")", R"("type_id": "XOR2_X1", "tile_id")")),
            K::DanglingReference);
  EXPECT_EQ(error_kind(replace(kManifest, R"("tile_id": "t0", "bbox": [90)", R"("tile_id": "t9", "bbox": [90)")),
            K::DanglingReference);
}

TEST(Manifest, DanglingReferenceNamesTheId) {
  try {
    parse_manifest(replace(kManifest, R"("type_id": "NOR2_X1", "tile_id")", R"("type_id": "XOR2_X1", "tile_id")"));
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_EQ(e.offending_id(), "XOR2_X1");
  }
}

TEST(Manifest, MissingFile) {
  try {
    load_manifest("/nonexistent/manifest.json");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_EQ(e.kind(), ManifestError::Kind::MissingFile);
  }
}

TEST(Manifest, LookupOfUnknownIdThrows) {
  const auto m = parse_manifest(kManifest);
  EXPECT_ANY_THROW(m.instance("nope"));
  EXPECT_ANY_THROW(m.cell_type("nope"));
}

TEST(Images, PngAndTiffRoundTrip) {
  const auto dir = scratch_dir("images");
  GrayImage img(13, 7);
  for (std::size_t i = 0; i < img.pixels().size(); ++i) img.pixels()[i] = static_cast<std::uint8_t>(i * 37);
  write_png(dir / "a.png", img);
  write_tiff(dir / "a.tif", img);
  EXPECT_EQ(read_gray_image(dir / "a.png"), img);
  EXPECT_EQ(read_gray_image(dir / "a.tif"), img);
  std::ofstream(dir / "junk.png") << "not an image";
  EXPECT_THROW(read_gray_image(dir / "junk.png"), IoError);
  EXPECT_THROW(read_gray_image(dir / "missing.png"), IoError);
}

TEST(Crop, ExpandsByMarginAndClampsToTile) {
  GrayImage tile(100, 80);
  for (std::size_t y = 0; y < 80; ++y) {
    for (std::size_t x = 0; x < 100; ++x) tile.at(x, y) = static_cast<std::uint8_t>(x + y);
  }
  InstanceRecord rec{"u", "T", "t", {20, 30, 10, 10}, Orientation::R0};
  auto c = crop_instance(tile, rec, 5);
  EXPECT_EQ(c.origin_x, 15);
  EXPECT_EQ(c.origin_y, 25);
  EXPECT_EQ(c.image.width(), 20u);
  EXPECT_EQ(c.image.at(0, 0), tile.at(15, 25));

  rec.bbox = {-3, 75, 10, 10};
  c = crop_instance(tile, rec, 4);
  EXPECT_EQ(c.origin_x, 0);
  EXPECT_EQ(c.origin_y, 71);
  EXPECT_EQ(c.image.width(), 11u);
  EXPECT_EQ(c.image.height(), 9u);

  rec.bbox = {200, 0, 10, 10};
  EXPECT_THROW(crop_instance(tile, rec, 2), InputError);
  rec.bbox = {0, 0, 10, 10};
  EXPECT_THROW(crop_instance(tile, rec, -1), InputError);
}

TEST(Extract, EveryOrientationGivesTheCanonicalPattern) {
  const ViaSet pattern({{1.0, 1.0}, {4.5, 1.5}, {2.5, 3.5}});
  auto m = parse_manifest(kManifest);
  GrayImage tile(400, 80, 30);
  const Orientation orients[] = {Orientation::R0, Orientation::MX, Orientation::R180, Orientation::MX_R180};
  m.instances.clear();
  for (int k = 0; k < 4; ++k) {
    const PixelBox box{20 + 90L * k, 10, 60, 50};
    m.instances.push_back({"u" + std::to_string(k), "NAND2_X1", "t0", box, orients[k]});
    for (const auto& p : apply_orientation(pattern, orients[k], 6, 5)) {
      stamp_disk(tile, static_cast<double>(box.x) + p.x * 10, static_cast<double>(box.y) + p.y * 10, 3.5, 220);
    }
  }
  for (const auto& rec : m.instances) {
    const auto inst = extract_instance(m, rec, ExtractionConfig{}, tile);
    EXPECT_EQ(inst.instance_id, rec.instance_id);
    EXPECT_EQ(inst.type_id, "NAND2_X1");
    ASSERT_EQ(inst.vias.size(), 3u) << rec.instance_id;
    EXPECT_LT(max_center_error(pattern, inst.vias), 0.06) << rec.instance_id;
  }
}

TEST(Extract, EmptyCellHasNoVias) {
  const auto m = parse_manifest(kManifest);
  const GrayImage tile(200, 80, 30);
  const auto inst = extract_instance(m, m.instance("u1"), ExtractionConfig{}, tile);
  EXPECT_TRUE(inst.vias.empty());
}

TEST(Extract, DefaultMarginIsOneUnit) {
  NodeConfig node{"x", 1, kMatchingRadius, 7.6};
  EXPECT_EQ(default_margin(node), 8);
}

TEST(TileCache, LoadsOnceAndReportsMissingTiles) {
  const auto dir = scratch_dir("tiles");
  fs::create_directories(dir / "tiles");
  write_png(dir / "tiles/t0.png", GrayImage(8, 8, 3));
  std::ofstream(dir / "manifest.json") << kManifest;
  auto m = load_manifest(dir / "manifest.json");
  TileCache cache(m);
  const auto a = cache.get("t0");
  EXPECT_EQ(a, cache.get("t0"));
  EXPECT_EQ(a->width(), 8u);
  m.tiles.push_back({"t1", "tiles/t1.png"});
  TileCache cache2(m);
  EXPECT_THROW(cache2.get("t1"), IoError);
}

TEST(ViaCsv, RoundTrip) {
  const auto dir = scratch_dir("csv");
  const std::vector<CellInstance> in{
      {"u1", "A", ViaSet({{1.25, 2.5}, {0.125, 3}})},
      {"u2", "B", ViaSet({{4, 4}})},
  };
  write_via_csv(dir / "v.csv", in);
  const auto text = format_via_csv(in);
  EXPECT_EQ(text.substr(0, text.find('\n')), "instance_id,type_id,x,y");
  EXPECT_NE(text.find("u1,A,0.125000,3.000000"), std::string::npos);
  const auto out = read_via_csv(dir / "v.csv");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].instance_id, "u1");
  EXPECT_EQ(out[0].vias, in[0].vias);
  EXPECT_EQ(out[1].type_id, "B");
  EXPECT_EQ(out[1].vias, in[1].vias);
}

TEST(ViaCsv, MalformedRowsAreIoErrors) {
  const auto dir = scratch_dir("csv_bad");
  std::ofstream(dir / "bad.csv") << "instance_id,type_id,x,y\nu1,A,1.0\n";
  EXPECT_THROW(read_via_csv(dir / "bad.csv"), IoError);
  std::ofstream(dir / "bad2.csv") << "instance_id,type_id,x,y\nu1,A,one,2\n";
  EXPECT_THROW(read_via_csv(dir / "bad2.csv"), IoError);
  EXPECT_THROW(read_via_csv(dir / "missing.csv"), IoError);
}
