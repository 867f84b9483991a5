// Command-line driver for the CutFEM experiments.
//
//   cutgp <convergence|kernelbench|multiballs|breakdown> [--key value]...
//
// Options may also come from a `key = value` file given with --config;
// flags on the command line take precedence.

#include <cutgp/harness.hpp>

#include <CLI11.hpp>

#include <iostream>

int
main(int argc, char **argv)
{
  cutgp::RunConfig cfg;
  CLI::App         app{"Matrix-free CutFEM Poisson solver with tensor-product ghost penalty"};
  app.set_config("--config", "", "Read options from a key = value file");

  app.add_option("command", cfg.command, "convergence | kernelbench | multiballs | breakdown")
    ->required()
    ->check(CLI::IsMember({"convergence", "kernelbench", "multiballs", "breakdown"}));
  app.add_option("--dim", cfg.dim, "Spatial dimension (2 or 3); disk implies 2, sphere implies 3");
  app.add_option("--degrees", cfg.degrees, "Polynomial degrees")->delimiter(',');
  app.add_option("--refinements", cfg.refinements, "Mesh levels of a convergence sweep");
  app.add_option("--base-cells", cfg.base_cells, "Cells per axis on the coarsest convergence mesh");
  app.add_option("--box-lo", cfg.box_lo, "Lower corner coordinate of the bounding box");
  app.add_option("--box-hi", cfg.box_hi, "Upper corner coordinate of the bounding box");
  app.add_option("--domain", cfg.domain, "disk | sphere | balls | halfspace")
    ->check(CLI::IsMember({"disk", "sphere", "balls", "halfspace"}));
  app.add_option("--balls", cfg.ball_counts, "Ball counts for multiballs")->delimiter(',');
  app.add_option("--seed", cfg.seed, "Seed of the ball generator");
  app.add_option("--r0", cfg.r0, "Ball radius times ball count");
  app.add_option("--offset", cfg.offset, "Half-space offset: the domain is x < offset");
  app.add_option("--gamma-a", cfg.gamma_A, "Ghost penalty strength");
  app.add_option("--gamma-d", cfg.gamma_D, "Nitsche penalty (divided by h)");
  app.add_option("--cell-quadrature", cfg.cell_quadrature, "Gauss points per axis on uncut cells");
  app.add_option("--cut-quadrature", cfg.cut_quadrature, "1D order of the cut-cell rules");
  app.add_option("--error-quadrature", cfg.error_quadrature, "1D order for error integration");
  app.add_option("--output", cfg.output_dir, "Output directory");
  app.add_option("--workers", cfg.workers, "Threads used inside vmult");
  app.add_option("--tolerance", cfg.tolerance, "Relative CG tolerance");
  app.add_option("--mesh-refinements", cfg.mesh_refinements, "multiballs mesh has 2^n cells per axis");
  app.add_option("--breakdown-cells", cfg.breakdown_cells, "Cells per axis for breakdown");
  app.add_option("--repetitions", cfg.repetitions, "vmults per timing batch");
  app.add_option("--trials", cfg.trials, "Timing batches; the median is reported");
  app.add_option("--kernel-applications", cfg.kernel_applications, "Applications per kernel timing");
  app.add_flag("--strict", cfg.strict, "Exit with code 3 if any solve fails to converge");

  try
    {
      app.parse(argc, argv);
    }
  catch (const CLI::CallForHelp &e)
    {
      return app.exit(e);
    }
  catch (const CLI::ParseError &e)
    {
      app.exit(e);
      return 2;
    }

  if (app.count("--dim") == 0)
    {
      if (cfg.domain == "sphere")
        cfg.dim = 3;
      else if (cfg.domain == "disk")
        cfg.dim = 2;
    }
  else if (app.count("--domain") == 0)
    cfg.domain = cfg.dim == 3 ? "sphere" : "disk";

  try
    {
      return cutgp::run_command(cfg, std::cerr);
    }
  catch (const cutgp::ConfigError &e)
    {
      std::cerr << "configuration error: " << e.what() << '\n';
      return 2;
    }
  catch (const std::exception &e)
    {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
}
