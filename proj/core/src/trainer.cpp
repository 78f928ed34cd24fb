#include "veml/trainer.hpp"

#include <csignal>
#include <filesystem>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "veml/binary_io.hpp"
#include "veml/digest.hpp"
#include "veml/error.hpp"
#include "veml/repository.hpp"

namespace veml {

namespace fs = std::filesystem;

TrainResult MockTrainer::train(const TrainRequest& request, std::stop_token stop) {
  ++calls_;
  if (stop.stop_requested()) fail(ErrorCode::cancelled, "training cancelled");
  if (!failure_.empty()) {
    auto msg = std::exchange(failure_, {});
    fail(ErrorCode::trainer_failure, msg);
  }
  TrainResult r;
  const auto text = canonical(request.config);
  const auto digest = sha256({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  r.trained_model_ref = "mock://model/" + to_hex(digest).substr(0, 16);
  r.metrics = metrics_;
  return r;
}

TrainResult ExternalCommandTrainer::train(const TrainRequest& request, std::stop_token stop) {
  if (!request.repository) fail(ErrorCode::invalid_argument, "external trainer needs a repository");
  fs::create_directories(work_dir_);
  const auto checkout_path = work_dir_ + "/checkout.bin";
  const auto result_path = work_dir_ + "/result.json";
  fs::remove(result_path);

  const auto records = request.repository->store().checkout(request.data_version);
  write_file_atomic(checkout_path, encode_checkout(records));
  auto config = request.config;
  config["checkout_path"] = checkout_path;
  config["checkout_records"] = records.size();
  const auto text = config.dump(2) + "\n";
  write_file_atomic(work_dir_ + "/config.json", Blob(text.begin(), text.end()));

  const pid_t pid = ::fork();
  if (pid < 0) fail(ErrorCode::trainer_failure, "fork failed");
  if (pid == 0) {
    ::setenv("VEML_WORK_DIR", work_dir_.c_str(), 1);
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  int status = 0;
  for (;;) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0) fail(ErrorCode::trainer_failure, "waitpid failed");
    if (stop.stop_requested()) {
      ::kill(-pid, SIGTERM);
      ::kill(pid, SIGTERM);
      ::waitpid(pid, &status, 0);
      fail(ErrorCode::cancelled, "training cancelled; trainer command terminated");
    }
    std::this_thread::sleep_for(poll_);
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    fail(ErrorCode::trainer_failure, "trainer command failed with status " +
                                         std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  if (!fs::exists(result_path)) fail(ErrorCode::trainer_failure, "trainer command wrote no result.json");
  const auto bytes = read_file(result_path);
  const auto doc = Document::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("trained_model_ref") ||
      !doc["trained_model_ref"].is_string()) {
    fail(ErrorCode::trainer_failure, "result.json must hold a string 'trained_model_ref'");
  }
  TrainResult r;
  r.trained_model_ref = doc["trained_model_ref"].get<std::string>();
  r.metrics = doc.value("metrics", Document::object());
  if (!r.metrics.is_object()) fail(ErrorCode::trainer_failure, "result.json 'metrics' must be an object");
  return r;
}

}  // namespace veml
