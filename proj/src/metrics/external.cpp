#include <array>
#include <cstdio>
#include <memory>
#include <regex>

#include "endoagent/error.hpp"
#include "endoagent/image_io.hpp"
#include "endoagent/metrics.hpp"

namespace endoagent::metrics {

SubprocessScorer::SubprocessScorer(std::string name, std::string command,
                                   std::filesystem::path scratch_dir)
    : name_(std::move(name)), command_(std::move(command)), scratch_(std::move(scratch_dir)) {}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

double SubprocessScorer::score(const ImageBuf& img, const ImageBuf* reference) {
  std::filesystem::create_directories(scratch_);
  const auto image_path = scratch_ / (name_ + "_image.png");
  const auto ref_path = scratch_ / (name_ + "_reference.png");
  save_image(img, image_path);
  std::string cmd = command_ + " " + shell_quote(image_path.string());
  if (reference) {
    save_image(*reference, ref_path);
    cmd += " " + shell_quote(ref_path.string());
  }

  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw Error(ErrorCode::IoFailure, "cannot run scorer " + name_);
  std::string output;
  std::array<char, 256> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get())) output += buf.data();
  const int status = pclose(pipe.release());
  if (status != 0) throw Error(ErrorCode::IoFailure, name_ + " exited with status " + std::to_string(status), output);

  static const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
  std::smatch m;
  if (!std::regex_search(output, m, number)) {
    throw Error(ErrorCode::ParseError, name_ + " printed no number", output);
  }
  return std::stod(m.str());
}

}  // namespace endoagent::metrics
