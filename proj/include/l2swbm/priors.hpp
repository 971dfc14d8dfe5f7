#pragma once

// Calendar-month prior fitting for the latent water-balance components.
//
// Families are fixed by component: P is Gamma (Thom's approximate maximum
// likelihood fit), R is log-normal, and E, Q, D are normal. E and Q
// precisions are halved by default to widen the priors for months whose
// historical range is narrow.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "l2swbm/calendar.hpp"
#include "l2swbm/errors.hpp"
#include "l2swbm/ingest.hpp"

namespace l2swbm {

struct NormalPrior {
  double mean = 0.0;
  double precision = 1.0;
  bool operator==(const NormalPrior&) const = default;
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  bool operator==(const GammaPrior&) const = default;
};

struct LogNormalPrior {
  double log_mean = 0.0;
  double log_precision = 1.0;
  bool operator==(const LogNormalPrior&) const = default;
};

using PriorRecord = std::variant<NormalPrior, GammaPrior, LogNormalPrior>;

enum class PriorFamily { Normal, Gamma, LogNormal };

PriorFamily family_for(Component c);
PriorFamily family_of(const PriorRecord& r);
const char* family_name(PriorFamily f);
double prior_mean(const PriorRecord& r);

class PriorFitError : public ConfigError {
 public:
  PriorFitError(std::string lake, Component component, int month, const std::string& what);
  const std::string& lake() const { return lake_; }
  Component component() const { return component_; }
  int month() const { return month_; }

 private:
  std::string lake_;
  Component component_;
  int month_;
};

NormalPrior fit_normal(std::span<const double> history, double precision_scale);
GammaPrior fit_gamma_thom(std::span<const double> history);
LogNormalPrior fit_lognormal(std::span<const double> history);

struct FitRules {
  // Multiplier on the fitted normal precision; components not listed use 1.
  std::map<Component, double> precision_scale{{Component::E, 0.5}, {Component::Q, 0.5},
                                               {Component::D, 1.0}};
  // Fewer available points than this in a calendar month triggers a warning.
  std::size_t min_points_warning = 10;

  double scale_for(Component c) const;
};

class PriorSpec {
 public:
  void set(const std::string& lake, Component c, int month, PriorRecord record);
  const PriorRecord* find(const std::string& lake, Component c, int month) const;
  // Throws BuildError naming the missing cell.
  const PriorRecord& at(const std::string& lake, Component c, int month) const;

  std::size_t size() const { return cells_.size(); }
  std::vector<std::string> lakes() const;

  // Checks 12 cells per (lake, component) and that families match components.
  void validate() const;

  std::string to_json() const;
  static PriorSpec from_json(const std::string& text);
  void save(const std::string& path) const;
  static PriorSpec load(const std::string& path);

  bool operator==(const PriorSpec&) const = default;

 private:
  struct Key {
    std::string lake;
    Component component;
    int month;
    auto operator<=>(const Key&) const = default;
    bool operator==(const Key&) const = default;
  };
  std::map<Key, PriorRecord> cells_;
};

// Fits 12 calendar-month priors for each supplied (lake, component) history.
// Only available (unmasked) entries are used.
PriorSpec fit_all(const std::vector<ComponentSeries>& history, const FitRules& rules,
                  std::vector<std::string>* warnings = nullptr);

}  // namespace l2swbm
