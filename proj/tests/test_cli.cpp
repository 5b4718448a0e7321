/* Copyright 2026 The distributed-vdi Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "httplib.h"
#include "vdi/image_io.hpp"
#include "vdi/scenes.hpp"
#include "vdi/vdi_render.hpp"

namespace vdi::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code;
  std::string out, err;
  json out_json() const { return json::parse(out); }
  json err_json() const { return json::parse(err); }
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vdi_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("vdi_cli_test_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_scene(const json& j, const std::string& name = "scene.json") const {
    std::ofstream(path(name)) << j.dump();
    return path(name);
  }

  static json shells_scene() {
    return {{"name", "shells"},
            {"volume", {{"kind", "two_shells"}, {"dims", {32, 32, 32}}}},
            {"camera", {{"width", 32}, {"height", 32}}},
            {"n_sup", 6},
            {"step", 1.0 / 32}};
  }

  fs::path dir_;
};

TEST(ParseScene, DefaultsAndOverrides) {
  const Scene s = parse_scene(json{{"volume", {{"kind", "random_blobs"}, {"dims", {8, 8, 8}}, {"seed", 3}}}});
  EXPECT_EQ(s.n_sup, 8u);
  EXPECT_DOUBLE_EQ(s.step, 1.0 / 8);
  EXPECT_EQ(s.decomposition, "slab");
  EXPECT_EQ(s.k, 1u);
  EXPECT_EQ(s.camera.width, 64u);
  EXPECT_EQ(s.tf.digest(), scenes::default_transfer_function().digest());

  const Scene t = parse_scene(json{{"volume", {{"kind", "axis_gradient"}, {"dims", {4, 4, 8}}}},
                                   {"transfer_function", {{{"scalar", 0.0}, {"opacity", 0.0}},
                                                          {{"scalar", 1.0}, {"color", {1, 1, 1}}, {"opacity", 1.0}}}},
                                   {"decomposition", {{"kind", "interleaved"}, {"k", 2}, {"period", 2}}}});
  EXPECT_EQ(t.make_decomposition().pe_count(), 2u);
  EXPECT_DOUBLE_EQ(t.tf.lookup(1.0).a, 1.0);
}

TEST(ParseScene, RejectsUnknownKeysAtEveryLevel) {
  const json vol = {{"kind", "two_shells"}, {"dims", {8, 8, 8}}};
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"nsup", 4}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", {{"kind", "two_shells"}, {"size", 8}}}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"camera", {{"fov", 30}}}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"decomposition", {{"kind", "slab"}, {"pes", 2}}}}), ConfigError);
}

TEST(ParseScene, RejectsInvalidValues) {
  const json vol = {{"kind", "two_shells"}, {"dims", {8, 8, 8}}};
  EXPECT_THROW(parse_scene(json::object()), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", {{"kind", "teapot"}}}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"n_sup", 0}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"step", -0.1}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"n_sup", "many"}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"decomposition", {{"kind", "octree"}}}}), ConfigError);
  EXPECT_THROW(parse_scene(json{{"volume", vol}, {"camera", {{"near", 5}, {"far", 1}}}}), InvalidArgument);
}

TEST_F(CliTest, RawVolumeResolvesRelativeToSceneFile) {
  std::vector<char> raw(4 * 4 * 4, char(200));
  std::ofstream(path("vol.raw"), std::ios::binary).write(raw.data(), std::streamsize(raw.size()));
  const Scene s = load_scene(write_scene({{"volume", {{"kind", "raw"}, {"path", "vol.raw"}, {"dims", {4, 4, 4}}}}}));
  EXPECT_NEAR(s.volume.at(1, 2, 3), 200.0 / 255.0, 1e-12);
  const auto bad = write_scene({{"volume", {{"kind", "raw"}, {"path", "vol.raw"}, {"dims", {4, 4, 5}}}}}, "bad.json");
  const auto r = run_cli({"generate", "--scene", bad, "-o", path("x.vdi")});
  EXPECT_EQ(r.code, kFormat);
  EXPECT_EQ(r.err_json()["error"]["kind"], "size_mismatch");
  EXPECT_EQ(r.err_json()["error"]["expected_bytes"], 80);
}

TEST_F(CliTest, GenerateDenseAndFullAreInflateEqual) {
  const auto scene = write_scene(shells_scene());
  const auto d = run_cli({"generate", "--scene", scene, "-o", path("d.vdi"), "--dense", "--compress"});
  const auto f = run_cli({"generate", "--scene", scene, "-o", path("f.vdi"), "--full"});
  ASSERT_EQ(d.code, 0) << d.err;
  ASSERT_EQ(f.code, 0) << f.err;
  const auto [dv, dm] = read_vdi(path("d.vdi"));
  const auto [fv, fm] = read_vdi(path("f.vdi"));
  ASSERT_TRUE(std::holds_alternative<VdiDense>(dv));
  ASSERT_TRUE(std::holds_alternative<VdiFull>(fv));
  EXPECT_EQ(as_full(dv), std::get<VdiFull>(fv));
  EXPECT_EQ(dm, fm);
  const json summary = d.out_json();
  EXPECT_LT(summary["dense_to_full_ratio"].get<double>(), 1.0);
  EXPECT_EQ(summary["n_sup"], 6);
}

TEST_F(CliTest, SimulateSinglePeMatchesGenerate) {
  const auto scene = write_scene(shells_scene());
  ASSERT_EQ(run_cli({"generate", "--scene", scene, "-o", path("g.vdi")}).code, 0);
  const auto r = run_cli({"simulate", "--scene", scene, "-o", path("s.vdi"), "--k", "1", "--metrics", path("m.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto g = as_full(read_vdi(path("g.vdi")).first);
  const auto s = as_full(read_vdi(path("s.vdi")).first);
  ASSERT_EQ(g.grid.size(), s.grid.size());
  double worst = 0;
  for (std::size_t i = 0; i < g.grid.size(); ++i) {
    const float* a = &g.grid[i].t_front;
    const float* b = &s.grid[i].t_front;
    for (int c = 0; c < 6; ++c) worst = std::max(worst, double(std::abs(a[c] - b[c])));
  }
  EXPECT_LE(worst, 1e-6);
  json metrics;
  std::ifstream(path("m.json")) >> metrics;
  for (const char* key : {"generation", "distribution", "compositing", "gather"})
    EXPECT_TRUE(metrics["stages_s"].contains(key)) << key;
  EXPECT_EQ(metrics["k"], 1);
}

TEST_F(CliTest, SimulateInterleavedPassesOracleComparison) {
  const auto scene = write_scene(shells_scene());
  ASSERT_EQ(run_cli({"simulate", "--scene", scene, "-o", path("s.vdi"), "--k", "4", "--decomposition", "interleaved",
                     "--period", "3"}).code, 0);
  ASSERT_EQ(run_cli({"render", path("s.vdi"), "-o", path("vdi.png")}).code, 0);
  ASSERT_EQ(run_cli({"render", "--scene", scene, "-o", path("dvr.png")}).code, 0);
  const auto c = run_cli({"compare", path("vdi.vimg"), path("dvr.vimg")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_GE(c.out_json()["ssim"].get<double>(), 0.99);
}

TEST_F(CliTest, RenderZeroDeviationIsTheOriginalAndBatchesAngles) {
  const auto scene = write_scene(shells_scene());
  ASSERT_EQ(run_cli({"generate", "--scene", scene, "-o", path("g.vdi")}).code, 0);
  ASSERT_EQ(run_cli({"render", path("g.vdi"), "-o", path("zero.png")}).code, 0);
  const Image zero = read_float_image(path("zero.vimg"));
  EXPECT_EQ(max_abs_difference(zero, render_original(as_full(read_vdi(path("g.vdi")).first))), 0.0);
  EXPECT_TRUE(fs::exists(path("zero.png")));

  const auto r = run_cli({"render", path("g.vdi"), "-o", path("orbit.png"), "--deviation", "0", "--deviation", "5",
                          "--deviation", "10", "--deviation", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(r.out_json()["images"].size(), 4u);
  for (const auto& img : r.out_json()["images"]) {
    EXPECT_TRUE(fs::exists(img["png"].get<std::string>()));
    EXPECT_TRUE(fs::exists(img["float"].get<std::string>()));
  }
  EXPECT_TRUE(fs::exists(path("orbit_dev5.png")));
  EXPECT_NE(max_abs_difference(read_float_image(path("orbit_dev0.vimg")), read_float_image(path("orbit_dev5.vimg"))),
            0.0);
}

TEST_F(CliTest, CompareReportsMetricsAndDifferenceImage) {
  Image a(16, 8), b(16, 8), c(8, 8);
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const float v = float(i % 7) / 7.0f;
    a.pixels[i] = {v, v, v, 1};
    b.pixels[i] = {1 - v, 1 - v, 1 - v, 1};
  }
  write_float_image(a, path("a.vimg"));
  write_float_image(b, path("b.vimg"));
  write_float_image(c, path("c.vimg"));
  const auto same = run_cli({"compare", path("a.vimg"), path("a.vimg")});
  ASSERT_EQ(same.code, 0);
  EXPECT_DOUBLE_EQ(same.out_json()["ssim"].get<double>(), 1.0);
  EXPECT_EQ(same.out_json()["psnr_db"], "inf");
  const auto diff = run_cli({"compare", path("a.vimg"), path("b.vimg"), "--diff", path("d.png")});
  ASSERT_EQ(diff.code, 0);
  EXPECT_LT(diff.out_json()["ssim"].get<double>(), 0.0);
  EXPECT_TRUE(diff.out_json()["psnr_db"].is_number());
  EXPECT_TRUE(fs::exists(path("d.png")));
  const auto mismatch = run_cli({"compare", path("a.vimg"), path("c.vimg")});
  EXPECT_EQ(mismatch.code, kInvalidInput);
  EXPECT_EQ(mismatch.err_json()["error"]["kind"], "invalid_argument");
}

TEST_F(CliTest, InspectDumpsHeader) {
  const auto scene = write_scene(shells_scene());
  ASSERT_EQ(run_cli({"generate", "--scene", scene, "-o", path("g.vdi"), "--compress"}).code, 0);
  const auto r = run_cli({"inspect", path("g.vdi")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = r.out_json();
  EXPECT_EQ(j["representation"], "dense");
  EXPECT_EQ(j["compressed"], true);
  EXPECT_EQ(j["width"], 32);
  EXPECT_EQ(j["camera"]["vfov_deg"], 40.0);
  EXPECT_EQ(j["file_bytes"], fs::file_size(path("g.vdi")));
}

TEST_F(CliTest, ErrorsAreStructured) {
  const auto usage = run_cli({"generate"});
  EXPECT_EQ(usage.code, kUsage);
  EXPECT_EQ(usage.err_json()["error"]["kind"], "usage");
  EXPECT_EQ(run_cli({}).code, kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kUsage);

  std::ofstream(path("junk.vdi")) << "not a vdi at all";
  const auto bad = run_cli({"inspect", path("junk.vdi")});
  EXPECT_EQ(bad.code, kFormat);
  EXPECT_EQ(bad.err_json()["error"]["detail"], "bad_magic");

  const auto scene = write_scene(shells_scene());
  ASSERT_EQ(run_cli({"generate", "--scene", scene, "-o", path("g.vdi")}).code, 0);
  fs::resize_file(path("g.vdi"), fs::file_size(path("g.vdi")) - 10);
  const auto truncated = run_cli({"render", path("g.vdi"), "-o", path("x.png")});
  EXPECT_EQ(truncated.code, kFormat);
  EXPECT_EQ(truncated.err_json()["error"]["detail"], "checksum");

  const auto unknown = write_scene({{"volume", {{"kind", "two_shells"}}}, {"colour", 1}}, "unknown.json");
  const auto cfg = run_cli({"generate", "--scene", unknown, "-o", path("u.vdi")});
  EXPECT_EQ(cfg.code, kInvalidInput);
  EXPECT_NE(cfg.err_json()["error"]["message"].get<std::string>().find("colour"), std::string::npos);

  const auto both = run_cli({"render", path("g.vdi"), "--scene", scene, "-o", path("y.png")});
  EXPECT_NE(both.code, 0);
}

TEST_F(CliTest, ServerServesMetaBytesAndViewer) {
  const auto scene = write_scene(shells_scene());
  ASSERT_EQ(run_cli({"generate", "--scene", scene, "-o", path("g.vdi")}).code, 0);
  fs::create_directories(dir_ / "viewer");
  std::ofstream(path("viewer/index.html")) << "<html>viewer</html>";

  VdiServer server(path("g.vdi"), dir_ / "viewer");
  const int port = server.bind("127.0.0.1", 0);
  std::thread worker([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 100 && !client.Get("/meta"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  const auto meta = client.Get("/meta");
  ASSERT_TRUE(meta);
  EXPECT_EQ(meta->status, 200);
  const auto [vdi, m] = read_vdi(path("g.vdi"));
  const json j = json::parse(meta->body);
  EXPECT_EQ(j["camera"]["position"][2].get<double>(), m.camera.position.z);
  EXPECT_EQ(j["n_sup"], 6);

  const auto body = client.Get("/vdi");
  ASSERT_TRUE(body);
  const auto bytes = read_binary_file(path("g.vdi"));
  ASSERT_EQ(body->body.size(), bytes.size());
  EXPECT_EQ(std::memcmp(body->body.data(), bytes.data(), bytes.size()), 0);

  const auto page = client.Get("/viewer/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->body, "<html>viewer</html>");
  const auto missing = client.Get("/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  VdiServer second(path("g.vdi"), {});
  EXPECT_THROW(second.bind("127.0.0.1", port), Error);

  server.stop();
  worker.join();
}

TEST_F(CliTest, ExecutableExitCodesAndStderr) {
  const std::string cmd = std::string(VDI_CLI_PATH) + " inspect " + path("missing.vdi") + " 2>" + path("err.txt");
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kUsage);
  json err;
  std::ifstream(path("err.txt")) >> err;
  EXPECT_EQ(err["error"]["kind"], "usage");

  const auto scene = write_scene(shells_scene());
  const std::string ok = std::string(VDI_CLI_PATH) + " generate --scene " + scene + " -o " + path("g.vdi") + " >/dev/null";
  const int ok_status = std::system(ok.c_str());
  ASSERT_TRUE(WIFEXITED(ok_status));
  EXPECT_EQ(WEXITSTATUS(ok_status), 0);
  EXPECT_TRUE(fs::exists(path("g.vdi")));
}

}  // namespace
}  // namespace vdi::cli
