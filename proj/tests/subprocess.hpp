#pragma once

// Minimal subprocess runner for CLI integration tests.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace plugnet::testproc {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string read_all(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

inline RunResult run(const std::string& command) {
  namespace fs = std::filesystem;
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / "plugnet-cli-tests";
  fs::create_directories(dir);
  fs::path out_path = dir / ("out." + std::to_string(++counter));
  fs::path err_path = dir / ("err." + std::to_string(counter));

  std::string full = command + " > " + out_path.string() + " 2> " +
                     err_path.string();
  int status = std::system(full.c_str());

  RunResult r;
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  r.out = read_all(out_path);
  r.err = read_all(err_path);
  fs::remove(out_path);
  fs::remove(err_path);
  return r;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "plugnet-cli-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace plugnet::testproc
