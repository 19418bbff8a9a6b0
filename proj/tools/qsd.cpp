#include <CLI11.hpp>
#include <iostream>
#include <qsd/commands.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Quasi-stationary structure of absorbed Markov chains"};
  app.require_subcommand(1);

  std::string chain_path, rules_path, v_override;
  bool simplex_recursion = false;
  int n_max = 4000;
  long samples = 100000;
  std::uint64_t seed = 0;
  int lab_case = 1;
  int instances = 100;
  std::vector<int> windows;

  auto* analyze = app.add_subcommand(
      "analyze", "Communication classes, accessibility order and per-class "
                 "Perron data");
  analyze->add_option("chain", chain_path, "chain file")->required();

  auto* qsd = app.add_subcommand(
      "qsd", "Full certificate: rates, polynomial parameters, extreme "
             "quasi-stationary measures");
  qsd->add_option("chain", chain_path, "chain file")->required();
  qsd->add_flag("--simplex", simplex_recursion,
                "recurse into the sub-leading families");

  auto* verify = app.add_subcommand(
      "verify", "Brute-force and Monte Carlo verification of the certificate");
  verify->add_option("chain", chain_path, "chain file")->required();
  verify->add_option("--n", n_max, "iteration horizon for the estimates");
  verify->add_option("--samples", samples, "Monte Carlo sample count");
  verify->add_option("--seed", seed, "Monte Carlo seed");

  auto* lab = app.add_subcommand(
      "operator-lab", "Seeded batch verification of the block-triangular "
                      "limit compositions");
  lab->add_option("--case", lab_case, "composition case 1, 2 or 3")->required();
  lab->add_option("--seed", seed, "batch seed");
  lab->add_option("--instances", instances, "instances to run");

  auto* lyap = app.add_subcommand(
      "lyapunov", "Drift criterion and truncation stability for rule files");
  lyap->add_option("rules", rules_path, "rule file")->required();
  lyap->add_option("--V", v_override, "weight expression override");
  lyap->add_option("--N", windows, "window sizes (at least two)")
      ->required()
      ->expected(-2);

  CLI11_PARSE(app, argc, argv);

  try {
    qsd::CommandResult res;
    if (analyze->parsed())
      res = qsd::cmd_analyze(chain_path);
    else if (qsd->parsed())
      res = qsd::cmd_qsd(chain_path, simplex_recursion);
    else if (verify->parsed())
      res = qsd::cmd_verify(chain_path, n_max, samples, seed);
    else if (lab->parsed())
      res = qsd::cmd_operator_lab(lab_case, seed, instances);
    else
      res = qsd::cmd_lyapunov(rules_path, v_override, windows);
    std::cout << qsd::dump_report(res.report);
    if (res.exit_code == 1 && res.report.contains("validation"))
      for (const auto& v : res.report["validation"]["violations"])
        std::cerr << "input error: " << v["what"].get<std::string>() << " at row "
                  << v["row"] << "\n";
    return res.exit_code;
  } catch (const qsd::IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const qsd::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const qsd::ChainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
