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

#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "httplib.h"
#include "vdi/image_io.hpp"
#include "vdi/scenes.hpp"
#include "vdi/vdi_render.hpp"

namespace vdi::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::int64_t positive_int(const json& j, const char* key, std::int64_t fallback, const std::string& where) {
  const auto v = get_or<std::int64_t>(j, key, fallback, where);
  if (v < 1) throw ConfigError(where + "." + key + " must be >= 1");
  return v;
}

Vec3 vec3_or(const json& j, const char* key, Vec3 fallback, const std::string& where) {
  const auto a = get_or<std::array<double, 3>>(j, key, {fallback.x, fallback.y, fallback.z}, where);
  return {a[0], a[1], a[2]};
}

Int3 dims_or(const json& j, Int3 fallback, const std::string& where) {
  const auto a = get_or<std::array<std::int64_t, 3>>(j, "dims", {fallback.x, fallback.y, fallback.z}, where);
  if (a[0] < 1 || a[1] < 1 || a[2] < 1) throw ConfigError(where + ".dims entries must be >= 1");
  return {a[0], a[1], a[2]};
}

ScalarVolume parse_volume(const json& j, const std::filesystem::path& base_dir) {
  const std::string where = "volume";
  check_keys(j, {"kind", "dims", "seed", "count", "thickness", "axis", "path", "format", "spacing", "origin"}, where);
  const auto kind = get_or<std::string>(j, "kind", "", where);
  const Int3 dims = dims_or(j, {64, 64, 64}, where);
  if (kind == "two_shells") return scenes::two_shells(dims, get_or<double>(j, "thickness", 0.035, where));
  if (kind == "axis_gradient") {
    const auto axis = get_or<int>(j, "axis", 2, where);
    if (axis < 0 || axis > 2) throw ConfigError("volume.axis must be 0, 1 or 2");
    return scenes::axis_gradient(dims, axis);
  }
  if (kind == "random_blobs")
    return scenes::random_blobs(dims, get_or<std::uint64_t>(j, "seed", 1, where),
                                static_cast<int>(positive_int(j, "count", 12, where)));
  if (kind == "raw") {
    if (!j.contains("path") || !j.contains("dims")) throw ConfigError("raw volume needs 'path' and 'dims'");
    std::filesystem::path path = get_or<std::string>(j, "path", "", where);
    if (path.is_relative()) path = base_dir / path;
    const auto format = get_or<std::string>(j, "format", "uint8", where);
    if (format != "uint8" && format != "uint16") throw ConfigError("volume.format must be 'uint8' or 'uint16'");
    const Grid placed = scenes::unit_grid(dims);
    return load_raw(path, dims, format == "uint8" ? VoxelFormat::kUint8 : VoxelFormat::kUint16,
                    vec3_or(j, "spacing", placed.spacing, where), vec3_or(j, "origin", placed.origin, where));
  }
  throw ConfigError("volume.kind must be one of two_shells, axis_gradient, random_blobs, raw (got '" + kind + "')");
}

TransferFunction parse_tf(const json& j) {
  if (!j.is_array()) throw ConfigError("transfer_function must be an array of control points");
  std::vector<ControlPoint> points;
  for (const auto& p : j) {
    const std::string where = "transfer_function[" + std::to_string(points.size()) + "]";
    check_keys(p, {"scalar", "color", "opacity"}, where);
    if (!p.contains("scalar")) throw ConfigError(where + " needs 'scalar'");
    points.push_back({get_or<double>(p, "scalar", 0, where), get_or<std::array<double, 3>>(p, "color", {0, 0, 0}, where),
                      get_or<double>(p, "opacity", 0, where)});
  }
  return TransferFunction(std::move(points));
}

Camera parse_camera(const json& j) {
  const std::string where = "camera";
  check_keys(j, {"position", "target", "up", "vfov_deg", "width", "height", "near", "far"}, where);
  const Camera d = scenes::default_camera();
  Camera c = Camera::look_at(vec3_or(j, "position", d.position, where), vec3_or(j, "target", {0, 0, 0}, where),
                             vec3_or(j, "up", d.up, where), get_or<double>(j, "vfov_deg", d.vfov_deg, where),
                             static_cast<std::uint32_t>(positive_int(j, "width", d.width, where)),
                             static_cast<std::uint32_t>(positive_int(j, "height", d.height, where)),
                             get_or<double>(j, "near", d.near, where), get_or<double>(j, "far", d.far, where));
  c.validate();
  return c;
}

double min_spacing(const Grid& g) { return std::min({g.spacing.x, g.spacing.y, g.spacing.z}); }

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

struct VdiStats {
  std::uint64_t supersegments = 0, max_list = 0;
};

VdiStats stats_of(const AnyVdi& vdi) {
  VdiStats s;
  std::visit(
      [&](const auto& v) {
        for (std::size_t i = 0; i < v.list_count(); ++i) {
          const std::uint64_t n = v.list(i).size();
          s.supersegments += n;
          s.max_list = std::max(s.max_list, n);
        }
      },
      vdi);
  return s;
}

json summary_json(const AnyVdi& vdi, const VdiMeta& meta, const std::filesystem::path& path) {
  const VdiStats s = stats_of(vdi);
  const std::uint64_t lists = std::uint64_t(meta.camera.width) * meta.camera.height;
  const std::uint64_t full_bytes = lists * meta.n_sup * sizeof(Supersegment);
  const std::uint64_t dense_bytes = lists * sizeof(std::uint32_t) + s.supersegments * sizeof(Supersegment);
  return {{"output", path.string()},
          {"representation", std::holds_alternative<VdiFull>(vdi) ? "full" : "dense"},
          {"width", meta.camera.width},
          {"height", meta.camera.height},
          {"n_sup", meta.n_sup},
          {"supersegments", s.supersegments},
          {"max_list_length", s.max_list},
          {"full_bytes", full_bytes},
          {"dense_bytes", dense_bytes},
          {"dense_to_full_ratio", full_bytes ? double(dense_bytes) / double(full_bytes) : 0.0},
          {"file_bytes", std::filesystem::file_size(path)}};
}

std::filesystem::path with_deviation(const std::filesystem::path& base, double deg, bool multiple) {
  if (!multiple) return base;
  char buf[32];
  std::snprintf(buf, sizeof buf, "_dev%g", deg);
  auto p = base;
  p.replace_filename(base.stem().string() + buf + base.extension().string());
  return p;
}

void report(std::ostream& err, const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["kind"] = kind;
  extra["message"] = message;
  err << json{{"error", extra}}.dump() << std::endl;
}

}  // namespace

DomainDecomposition Scene::make_decomposition() const {
  if (decomposition == "slab") return make_slab_decomposition(volume.dims(), k);
  if (decomposition == "interleaved") return make_interleaved_decomposition(volume.dims(), k, period);
  throw ConfigError("decomposition kind must be 'slab' or 'interleaved' (got '" + decomposition + "')");
}

Scene parse_scene(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"name", "volume", "transfer_function", "camera", "n_sup", "step", "gamma_iterations", "decomposition"},
             "scene");
  if (!j.contains("volume")) throw ConfigError("scene needs a 'volume'");
  const json empty = json::object();
  const json& dec = j.contains("decomposition") ? j.at("decomposition") : empty;
  check_keys(dec, {"kind", "k", "period"}, "decomposition");
  ScalarVolume volume = parse_volume(j.at("volume"), base_dir);
  const double default_step = min_spacing(volume.grid());
  Scene s{get_or<std::string>(j, "name", "scene", "scene"),
          std::move(volume),
          j.contains("transfer_function") ? parse_tf(j.at("transfer_function")) : scenes::default_transfer_function(),
          parse_camera(j.contains("camera") ? j.at("camera") : empty),
          static_cast<std::uint32_t>(positive_int(j, "n_sup", 8, "scene")),
          get_or<double>(j, "step", default_step, "scene"),
          get_or<std::string>(dec, "kind", "slab", "decomposition"),
          static_cast<std::size_t>(positive_int(dec, "k", 1, "decomposition")),
          positive_int(dec, "period", 2, "decomposition"),
          static_cast<int>(positive_int(j, "gamma_iterations", kDefaultGammaIterations, "scene"))};
  if (!(s.step > 0)) throw ConfigError("scene.step must be > 0");
  if (s.decomposition != "slab" && s.decomposition != "interleaved")
    throw ConfigError("decomposition.kind must be 'slab' or 'interleaved'");
  return s;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scene '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("scene '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_scene(j, path.parent_path());
}

json camera_to_json(const Camera& c) {
  return {{"position", vec_json(c.position)}, {"forward", vec_json(c.forward)}, {"up", vec_json(c.up)},
          {"vfov_deg", c.vfov_deg},           {"width", c.width},                 {"height", c.height},
          {"near", c.near},                   {"far", c.far}};
}

json meta_to_json(const AnyVdi& vdi, const VdiMeta& meta) {
  const VdiStats s = stats_of(vdi);
  return {{"format_version", kVdiVersion},
          {"representation", std::holds_alternative<VdiFull>(vdi) ? "full" : "dense"},
          {"width", meta.camera.width},
          {"height", meta.camera.height},
          {"n_sup", meta.n_sup},
          {"step", meta.step},
          {"camera", camera_to_json(meta.camera)},
          {"tf_digest", hex64(meta.tf_digest)},
          {"volume_digest", hex64(meta.volume_digest)},
          {"supersegments", s.supersegments},
          {"max_list_length", s.max_list},
          {"orbit_pivot", vec_json(orbit_pivot(as_full(vdi), meta.camera))}};
}

json metrics_to_json(const CompositeMetrics& m, const std::string& decomposition) {
  const auto stages = [](const StageTimings& t) {
    return json{{"generation", t.generation_s},
                {"distribution", t.distribution_s},
                {"compositing", t.compositing_s},
                {"gather", t.gather_s}};
  };
  json pes = json::array();
  for (std::size_t i = 0; i < m.pes.size(); ++i) {
    const auto& p = m.pes[i];
    pes.push_back({{"rank", i},
                   {"sub_supersegments", p.sub_supersegments},
                   {"exchange_sent_bytes", p.exchange_sent_bytes},
                   {"exchange_received_bytes", p.exchange_received_bytes},
                   {"gather_sent_bytes", p.gather_sent_bytes},
                   {"overlaps_resolved", p.overlaps_resolved},
                   {"stages_s", stages(p.timings)}});
  }
  const auto bound = m.full_exchange_bound_bytes();
  return {{"k", m.k},
          {"decomposition", decomposition},
          {"width", m.width},
          {"height", m.height},
          {"n_sup", m.n_sup},
          {"stages_s", stages(m.timings)},
          {"exchange_bytes", m.exchange_bytes()},
          {"full_exchange_bound_bytes", bound},
          {"exchange_to_bound_ratio", bound ? double(m.exchange_bytes()) / double(bound) : 0.0},
          {"pes", pes}};
}

struct VdiServer::Impl {
  httplib::Server server;
  std::string file;
  std::string meta;
};

VdiServer::VdiServer(const std::filesystem::path& vdi_path, const std::filesystem::path& viewer_dir)
    : impl_(std::make_unique<Impl>()) {
  const auto [vdi, meta] = read_vdi(vdi_path);
  const auto bytes = read_binary_file(vdi_path);
  impl_->file.assign(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  impl_->meta = meta_to_json(vdi, meta).dump();
  auto& srv = impl_->server;
  // httplib's default also sets SO_REUSEPORT, which would let a second server share a busy port
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  srv.Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(impl_->meta, "application/json");
  });
  srv.Get("/vdi", [this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(impl_->file, "application/octet-stream");
  });
  if (!viewer_dir.empty() && std::filesystem::is_directory(viewer_dir)) {
    srv.set_mount_point("/viewer", viewer_dir.string());
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/viewer/index.html"); });
  }
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404)
      res.set_content(json{{"error", {{"kind", "not_found"}, {"path", req.path}}}}.dump(), "application/json");
  });
}

VdiServer::~VdiServer() { stop(); }

int VdiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind any port on " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use or unavailable)");
  return port;
}

void VdiServer::listen() { impl_->server.listen_after_bind(); }

void VdiServer::stop() {
  if (impl_) impl_->server.stop();
}

namespace {

struct Options {
  std::string scene, output, metrics, vdi, diff, decomposition, viewer_dir = "viewer", host = "127.0.0.1";
  bool full = false, dense = false, compress = false;
  std::optional<std::uint32_t> n_sup;
  std::optional<double> step, march_step;
  std::optional<std::size_t> k;
  std::optional<std::int64_t> period;
  std::vector<double> deviations, pivot;
  double early_term = 1.0;
  std::string image_a, image_b;
  int port = 8080;
};

Scene scene_with_overrides(const Options& o) {
  Scene s = load_scene(o.scene);
  if (o.n_sup) s.n_sup = *o.n_sup;
  if (o.step) s.step = *o.step;
  if (o.k) s.k = *o.k;
  if (o.period) s.period = *o.period;
  if (!o.decomposition.empty()) s.decomposition = o.decomposition;
  if (s.n_sup < 1) throw ConfigError("--n-sup must be >= 1");
  if (!(s.step > 0)) throw ConfigError("--step must be > 0");
  if (s.k < 1) throw ConfigError("--k must be >= 1");
  return s;
}

int cmd_generate(const Options& o, std::ostream& out) {
  const Scene s = scene_with_overrides(o);
  const GenerationSetup setup{s.volume, s.tf, s.camera, s.n_sup, s.step, std::nullopt, s.gamma_iterations};
  const auto t0 = std::chrono::steady_clock::now();
  AnyVdi vdi;
  VdiMeta meta;
  if (o.full) {
    std::tie(vdi, meta) = generate_full(setup);
  } else {
    auto [dense, m] = generate_dense(setup);
    vdi = std::move(dense);
    meta = m;
  }
  const double seconds = seconds_since(t0);
  write_vdi(vdi, meta, o.output, o.compress);
  json summary = summary_json(vdi, meta, o.output);
  summary["scene"] = s.name;
  summary["generation_s"] = seconds;
  out << summary.dump(2) << '\n';
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const Scene s = scene_with_overrides(o);
  const auto decomposition = s.make_decomposition();
  Harness harness(s.k);
  auto result = composite(harness, decomposition, s.volume, s.tf, s.camera, s.n_sup, s.step, s.gamma_iterations);
  const AnyVdi vdi = o.full ? AnyVdi(std::move(result.vdi)) : AnyVdi(densify(result.vdi));
  write_vdi(vdi, result.meta, o.output, o.compress);
  const json metrics = metrics_to_json(result.metrics, s.decomposition);
  if (!o.metrics.empty()) write_json_file(metrics, o.metrics);
  json summary = summary_json(vdi, result.meta, o.output);
  summary["scene"] = s.name;
  summary["metrics"] = metrics;
  out << summary.dump(2) << '\n';
  return kOk;
}

int cmd_render(const Options& o, std::ostream& out) {
  const std::vector<double> deviations = o.deviations.empty() ? std::vector<double>{0.0} : o.deviations;
  std::optional<Vec3> pivot;
  if (!o.pivot.empty()) pivot = Vec3{o.pivot[0], o.pivot[1], o.pivot[2]};
  std::function<Image(double)> render;
  std::optional<Scene> scene;
  std::optional<VdiFull> vdi;
  Camera gen;
  if (!o.scene.empty()) {
    scene.emplace(scene_with_overrides(o));
    gen = scene->camera;
    if (!pivot) pivot = scene->volume.grid().center();
    render = [&](double deg) {
      return render_dvr(scene->volume, scene->tf, gen.orbited(*pivot, deg), scene->step, o.early_term);
    };
  } else {
    const auto [any, meta] = read_vdi(o.vdi);
    vdi = as_full(any);
    gen = meta.camera;
    if (!pivot) pivot = orbit_pivot(*vdi, gen);
    const double march = o.march_step.value_or(meta.step);
    if (!(march > 0)) throw ConfigError("--march-step must be > 0");
    render = [&, march](double deg) {
      if (deg == 0.0) return render_original(*vdi);
      return render_novel(*vdi, gen, gen.orbited(*pivot, deg), march, o.early_term);
    };
  }
  json images = json::array();
  for (double deg : deviations) {
    const Image img = render(deg);
    const auto png = with_deviation(o.output, deg, deviations.size() > 1);
    auto raw = png;
    raw.replace_extension(".vimg");
    write_png(img, png);
    write_float_image(img, raw);
    images.push_back({{"deviation_deg", deg}, {"png", png.string()}, {"float", raw.string()}});
  }
  out << json{{"images", images}, {"pivot", vec_json(*pivot)}}.dump(2) << '\n';
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const Image a = read_image(o.image_a), b = read_image(o.image_b);
  if (a.width != b.width || a.height != b.height)
    throw InvalidArgument("image dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  const double p = psnr(a, b);
  json report{{"width", a.width}, {"height", a.height}, {"ssim", ssim(a, b)}};
  report["psnr_db"] = std::isinf(p) ? json("inf") : json(p);
  if (!o.diff.empty()) {
    write_png(ssim_difference_image(a, b), o.diff);
    report["difference_image"] = o.diff;
  }
  out << report.dump(2) << '\n';
  return kOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  const auto bytes = read_binary_file(o.vdi);
  const auto [vdi, meta] = decode_vdi(bytes);
  json j = meta_to_json(vdi, meta);
  j["file_bytes"] = bytes.size();
  j["compressed"] = (std::to_integer<unsigned>(bytes[7]) & 1u) != 0;
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  VdiServer server(o.vdi, o.viewer_dir);
  const int port = server.bind(o.host, o.port);
  out << json{{"listening", "http://" + o.host + ":" + std::to_string(port)}}.dump() << std::endl;
  server.listen();
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Volumetric depth image generation, distributed compositing and rendering", "vdi_cli"};
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Generate a VDI from a scene on a single domain");
  auto* simulate = app.add_subcommand("simulate", "Run sort-last compositing on k simulated PEs");
  for (auto* sub : {generate, simulate}) {
    sub->add_option("--scene", o.scene, "Scene JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", o.output, "Output VDI path")->required();
    sub->add_option("--n-sup", o.n_sup, "Supersegments per list");
    sub->add_option("--step", o.step, "Sampling step in world units");
    auto* full = sub->add_flag("--full", o.full, "Write the fixed-capacity layout");
    sub->add_flag("--dense", o.dense, "Write the packed layout (default)")->excludes(full);
    sub->add_flag("--compress", o.compress, "LZ4-compress the file body");
  }
  simulate->add_option("--k", o.k, "Number of PEs");
  simulate->add_option("--decomposition", o.decomposition, "slab or interleaved")
      ->check(CLI::IsMember({"slab", "interleaved"}));
  simulate->add_option("--period", o.period, "Interleave period in z-slices");
  simulate->add_option("--metrics", o.metrics, "Metrics JSON output path");

  auto* render = app.add_subcommand("render", "Render a VDI, or a scene by direct volume rendering");
  auto* vdi_opt = render->add_option("vdi", o.vdi, "VDI file")->check(CLI::ExistingFile);
  render->add_option("--scene", o.scene, "Scene JSON for a ground-truth render")->check(CLI::ExistingFile)->excludes(vdi_opt);
  render->add_option("-o,--output", o.output, "Output PNG; a .vimg float dump is written alongside")->required();
  render->add_option("--deviation", o.deviations, "Orbit angle(s) in degrees about the dataset center");
  render->add_option("--pivot", o.pivot, "Orbit pivot x y z")->expected(3);
  render->add_option("--march-step", o.march_step, "Novel-view march step (default: generation step)");
  render->add_option("--step", o.step, "Scene sampling step override");
  render->add_option("--early-termination", o.early_term, "Opacity at which rays stop")->check(CLI::Range(0.0, 1.0));

  auto* compare = app.add_subcommand("compare", "SSIM and PSNR between two images (.png or .vimg)");
  compare->add_option("a", o.image_a)->required()->check(CLI::ExistingFile);
  compare->add_option("b", o.image_b)->required()->check(CLI::ExistingFile);
  compare->add_option("--diff", o.diff, "Write an SSIM difference image");

  auto* inspect = app.add_subcommand("inspect", "Print a VDI header as JSON");
  inspect->add_option("vdi", o.vdi)->required()->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Serve a VDI, its metadata and the viewer over HTTP");
  serve->add_option("vdi", o.vdi)->required()->check(CLI::ExistingFile);
  serve->add_option("--port", o.port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--viewer-dir", o.viewer_dir, "Directory of static viewer assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, "usage", e.what());
    return kUsage;
  }

  try {
    if (render->parsed() && o.vdi.empty() == o.scene.empty())
      throw ConfigError("render needs exactly one of a VDI path or --scene");
    if (generate->parsed()) return cmd_generate(o, out);
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (render->parsed()) return cmd_render(o, out);
    if (compare->parsed()) return cmd_compare(o, out);
    if (inspect->parsed()) return cmd_inspect(o, out);
    if (serve->parsed()) return cmd_serve(o, out);
  } catch (const VdiFormatError& e) {
    static constexpr const char* kKinds[] = {"bad_magic", "bad_version", "checksum", "corrupt", "io"};
    report(err, "vdi_format", e.what(), {{"detail", kKinds[static_cast<int>(e.kind)]}});
    return kFormat;
  } catch (const SizeMismatchError& e) {
    report(err, "size_mismatch", e.what(), {{"expected_bytes", e.expected_bytes}, {"actual_bytes", e.actual_bytes}});
    return kFormat;
  } catch (const CollectiveError& e) {
    report(err, "collective", e.what(), {{"pe", e.pe}});
    return kCollective;
  } catch (const InvalidArgument& e) {
    report(err, "invalid_argument", e.what());
    return kInvalidInput;
  } catch (const std::exception& e) {
    report(err, "error", e.what());
    return kFailure;
  }
  return kUsage;
}

}  // namespace vdi::cli
