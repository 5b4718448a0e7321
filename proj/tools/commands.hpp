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

// Command-line front end: scene configuration, subcommands and the VDI file server.

#ifndef VDI_TOOLS_COMMANDS_HPP_
#define VDI_TOOLS_COMMANDS_HPP_

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

#include "json.hpp"
#include "vdi/distributed.hpp"
#include "vdi/vdi_file.hpp"

namespace vdi::cli {

/// Invalid or unknown configuration values.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct Scene {
  std::string name;
  ScalarVolume volume;
  TransferFunction tf;
  Camera camera;
  std::uint32_t n_sup;
  double step;
  std::string decomposition;  // "slab" or "interleaved"
  std::size_t k;
  std::int64_t period;
  int gamma_iterations;

  DomainDecomposition make_decomposition() const;
};

/// Relative raw-volume paths resolve against `base_dir`.
Scene parse_scene(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scene load_scene(const std::filesystem::path& path);

nlohmann::json camera_to_json(const Camera& c);
nlohmann::json meta_to_json(const AnyVdi& vdi, const VdiMeta& meta);
nlohmann::json metrics_to_json(const CompositeMetrics& m, const std::string& decomposition);

/// Read-only HTTP service: GET /meta, GET /vdi, static viewer assets under /viewer/.
class VdiServer {
 public:
  VdiServer(const std::filesystem::path& vdi_path, const std::filesystem::path& viewer_dir);
  ~VdiServer();
  VdiServer(const VdiServer&) = delete;
  VdiServer& operator=(const VdiServer&) = delete;

  /// Binds the socket and returns the bound port (0 picks a free one). Throws when taken.
  int bind(const std::string& host, int port);
  /// Serves until stop(); requires a prior bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kInvalidInput = 3,
  kFormat = 4,
  kCollective = 5,
};

/// Runs one subcommand. Results go to `out`; failures go to `err` as a JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vdi::cli

#endif  // VDI_TOOLS_COMMANDS_HPP_
