// Copyright 2026 The ldpdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run, bench-mechanisms, audit and serve-owner.

#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "ldpdl/config.h"
#include "ldpdl/experiment.h"
#include "ldpdl/transport.h"

namespace {

int Fail(const absl::Status& status) {
  std::cerr << "ldpdl: " << status.message() << "\n";
  return status.code() == absl::StatusCode::kInvalidArgument ? 2 : 1;
}

absl::StatusOr<ldpdl::Config> LoadWithOverrides(
    const std::string& path, const std::vector<std::string>& overrides) {
  absl::StatusOr<ldpdl::Config> config = ldpdl::Config::Load(path);
  if (!config.ok()) return config.status();
  for (const std::string& assignment : overrides) {
    absl::Status s = config->SetFromAssignment(assignment);
    if (!s.ok()) return s;
  }
  return config;
}

struct RunArgs {
  std::string config;
  std::string mode;
  std::string out;
  std::string seed;
  std::string jobs;
  std::vector<std::string> overrides;
};

int Run(const RunArgs& args) {
  absl::StatusOr<ldpdl::Config> config =
      LoadWithOverrides(args.config, args.overrides);
  if (!config.ok()) return Fail(config.status());
  if (!args.mode.empty()) config->Set("mode", args.mode);
  if (!args.out.empty()) config->Set("output_dir", args.out);
  if (!args.seed.empty()) config->Set("seed", args.seed);
  if (!args.jobs.empty()) config->Set("jobs", args.jobs);
  absl::StatusOr<ldpdl::RunConfig> rc = ldpdl::ParseRunConfig(*config);
  if (!rc.ok()) return Fail(rc.status());
  absl::StatusOr<std::vector<ldpdl::PointResult>> results =
      ldpdl::RunExperiment(*rc);
  if (!results.ok()) return Fail(results.status());
  for (size_t i = 0; i < results->size(); ++i) {
    const ldpdl::PointResult& r = (*results)[i];
    std::cout << absl::StrFormat("%s final_accuracy=%.4f max_owner_spent=%.6g%s\n",
                                 ldpdl::RunId(i, r.point), r.final_accuracy,
                                 r.max_owner_spent,
                                 r.status.ok() ? "" : " (stopped: budgets exhausted)");
  }
  std::cout << "wrote " << rc->output_dir << "/results.csv\n";
  return 0;
}

int Bench(const std::string& path, const std::string& out,
          const std::vector<std::string>& overrides) {
  absl::StatusOr<ldpdl::Config> config = LoadWithOverrides(path, overrides);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<ldpdl::BenchConfig> bc = ldpdl::ParseBenchConfig(*config);
  if (!bc.ok()) return Fail(bc.status());
  absl::StatusOr<std::vector<ldpdl::BenchRow>> rows = ldpdl::BenchMechanisms(*bc);
  if (!rows.ok()) return Fail(rows.status());
  if (out.empty()) {
    ldpdl::WriteBenchCsv(std::cout, *rows);
    return 0;
  }
  std::ofstream file(out);
  ldpdl::WriteBenchCsv(file, *rows);
  file.close();
  if (!file) return Fail(absl::InternalError("cannot write " + out));
  return 0;
}

int Audit(const std::string& dir) {
  absl::StatusOr<ldpdl::AuditReport> report = ldpdl::AuditExperiment(dir);
  if (!report.ok()) return Fail(report.status());
  for (const std::string& p : report->problems) std::cout << p << "\n";
  std::cout << absl::StrFormat("audited %d runs, %d query records: %s\n",
                               report->runs, report->records,
                               report->ok() ? "ok" : "PROBLEMS FOUND");
  return report->ok() ? 0 : 1;
}

int Serve(const std::string& path, const std::vector<std::string>& overrides,
          int owner_id, const std::string& bind) {
  absl::StatusOr<ldpdl::Config> config = LoadWithOverrides(path, overrides);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<ldpdl::RunConfig> rc = ldpdl::ParseRunConfig(*config);
  if (!rc.ok()) return Fail(rc.status());
  absl::StatusOr<std::shared_ptr<ldpdl::DataOwner>> owner =
      ldpdl::BuildOwner(*rc, owner_id);
  if (!owner.ok()) return Fail(owner.status());

  // Block termination signals before any thread starts so that only sigwait
  // below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  absl::StatusOr<std::unique_ptr<ldpdl::OwnerNode>> node =
      ldpdl::OwnerNode::Start(bind, *owner);
  if (!node.ok()) return Fail(node.status());
  std::cout << absl::StrFormat("owner %d listening on %s\n", owner_id,
                               (*node)->address())
            << std::flush;
  int received = 0;
  sigwait(&signals, &received);
  (*node)->Shutdown();
  const ldpdl::OwnerLedger ledger = (*owner)->ledger();
  std::cout << absl::StrFormat("owner %d answered %d queries, spent %.6g of %.6g\n",
                               owner_id, ledger.answered(), ledger.spent(),
                               ledger.total_epsilon());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally private distributed knowledge transfer experiments"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", run_args.config, "Config file")->required();
  run->add_option("--mode", run_args.mode, "simulate or networked");
  run->add_option("--out", run_args.out, "Output directory");
  run->add_option("--seed", run_args.seed, "Base seed");
  run->add_option("--jobs", run_args.jobs, "Parallel sweep points");
  run->add_option("--set", run_args.overrides, "Override a key: key=value");

  std::string bench_config, bench_out;
  std::vector<std::string> bench_overrides;
  CLI::App* bench = app.add_subcommand(
      "bench-mechanisms", "Monte-Carlo mean estimation error per mechanism");
  bench->add_option("config", bench_config, "Config file")->required();
  bench->add_option("--out", bench_out, "CSV path (default: stdout)");
  bench->add_option("--set", bench_overrides, "Override a key: key=value");

  std::string audit_dir;
  CLI::App* audit = app.add_subcommand("audit", "Re-check a run's ledgers and trace");
  audit->add_option("dir", audit_dir, "Experiment output directory")->required();

  std::string serve_config, bind = "127.0.0.1:7000";
  std::vector<std::string> serve_overrides;
  int owner_id = 0;
  CLI::App* serve = app.add_subcommand("serve-owner", "Serve one data owner over TCP");
  serve->add_option("config", serve_config, "Config file")->required();
  serve->add_option("--owner-id", owner_id, "Owner id")->required();
  serve->add_option("--bind", bind, "host:port to listen on");
  serve->add_option("--set", serve_overrides, "Override a key: key=value");

  CLI11_PARSE(app, argc, argv);

  if (*run) return Run(run_args);
  if (*bench) return Bench(bench_config, bench_out, bench_overrides);
  if (*audit) return Audit(audit_dir);
  if (*serve) return Serve(serve_config, serve_overrides, owner_id, bind);
  return 2;
}
