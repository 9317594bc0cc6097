#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairl/data.hpp"
#include "fairl/geometry.hpp"
#include "fairl/realign.hpp"
#include "fairl/trainer.hpp"

namespace fairl {

// INI run configuration: one section per module, `section.key` addressing.
// Every key has a default; unknown sections or keys are rejected, values are
// type-checked when set. The resolved snapshot lists every key.
class RunConfig {
public:
  enum class Type { text, real, optional_real, integer, boolean, real_list, integer_list };

  struct Key {
    std::string name;  // section.key
    Type type;
    std::string value;
    std::string help;
  };

  RunConfig();

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& source = "<config>");

  // Throws std::invalid_argument for an unknown key or an ill-typed value.
  void set(const std::string& name, const std::string& value);
  // "section.key=value"
  void apply_override(const std::string& assignment);

  const std::string& text(const std::string& name) const;
  double real(const std::string& name) const;
  std::optional<double> optional_real(const std::string& name) const;
  std::int64_t integer(const std::string& name) const;
  std::size_t size(const std::string& name) const;
  bool boolean(const std::string& name) const;
  std::vector<double> reals(const std::string& name) const;
  std::vector<std::uint64_t> seeds() const;

  const std::vector<Key>& keys() const { return keys_; }
  std::string to_ini() const;
  void write(const std::filesystem::path& path) const;

  SyntheticConfig synthetic(std::uint64_t seed, double pair_mix) const;
  ObjectiveConfig objective() const;
  ScheduleConfig schedule() const;
  TrainConfig train(std::uint64_t seed) const;
  SamplingConfig sampling(std::uint64_t seed) const;
  BanditConfig bandit(std::uint64_t seed) const;
  PolicyTrainConfig policy(std::uint64_t seed) const;

private:
  const Key& find(const std::string& name) const;
  Key& find(const std::string& name);
  std::vector<Key> keys_;
};

}  // namespace fairl
