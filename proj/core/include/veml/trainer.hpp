#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <stop_token>

#include "veml/document.hpp"
#include "veml/ids.hpp"

namespace veml {

class Repository;

struct TrainRequest {
  Document config;  // method, seed, model, training, data_version_id
  VersionId data_version;
  const Repository* repository = nullptr;
};

struct TrainResult {
  std::string trained_model_ref;
  Document metrics = Document::object();
};

// Runs one training job. Implementations must be deterministic given the
// seed in the config. Throwing leaves the lineage untouched.
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual TrainResult train(const TrainRequest& request, std::stop_token stop) = 0;
};

// Returns preset metrics and a model ref derived from the config digest.
class MockTrainer final : public Trainer {
 public:
  explicit MockTrainer(Document metrics = Document::object()) : metrics_(std::move(metrics)) {}

  void fail_next(std::string message) { failure_ = std::move(message); }
  std::size_t calls() const noexcept { return calls_; }

  TrainResult train(const TrainRequest& request, std::stop_token stop) override;

 private:
  Document metrics_;
  std::string failure_;
  std::size_t calls_ = 0;
};

// Writes <work>/config.json (the request config plus a "checkout_path") and
// <work>/checkout.bin, then runs `command` through /bin/sh with VEML_WORK_DIR
// set. The command must write <work>/result.json holding
// {"trained_model_ref": string, "metrics": object}.
class ExternalCommandTrainer final : public Trainer {
 public:
  ExternalCommandTrainer(std::string command, std::string work_dir,
                         std::chrono::milliseconds poll = std::chrono::milliseconds(20))
      : command_(std::move(command)), work_dir_(std::move(work_dir)), poll_(poll) {}

  TrainResult train(const TrainRequest& request, std::stop_token stop) override;

 private:
  std::string command_;
  std::string work_dir_;
  std::chrono::milliseconds poll_;
};

}  // namespace veml
