#include "lampdet/harness/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace
{
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void print_summary(const lampdet::harness::PipelineReport& r)
{
    const auto& s = r.stats;
    std::cout << "detections: " << r.detections.size() << " (raw " << r.raw_detections << ")\n"
              << "clusters: " << s.clusters << ", linked " << s.linked_clusters << ", identified "
              << s.correctly_identified << ", states " << s.correct_states << "\n"
              << "mean distance to center: " << s.localization.mean_dist_to_center << " cm, variance "
              << s.localization.var_dist_to_center << " cm^2\n"
              << "mean distance to reference: " << s.localization.mean_dist_to_reference << " cm\n"
              << "mean refine time: " << r.mean_refine_ms << " ms\n";
    for (const auto& w : r.warnings)
        std::cerr << "warning: " << w << '\n';
}
} // namespace

int main(int argc, char** argv)
{
    namespace h = lampdet::harness;
    CLI::App app{"Lamp detection pipeline on synthetic building scenes"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::string plane_flag, method_name;
    std::optional<double> step;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "detect, cluster and report");
    run->add_option("--config", config_path, "INI configuration")->required();
    run->add_option("--plane-estimation", plane_flag, "on|off")->check(CLI::IsMember({"on", "off"}));
    run->add_option("--method", method_name, "d2co|d2co-e|d2co-it")->check(CLI::IsMember({"d2co", "d2co-e", "d2co-it"}));
    run->add_option("--step", step, "subdivision fraction of the longest model edge");
    run->add_option("--seed", seed, "scene seed");
    run->add_option("--out", out_dir, "output directory");

    auto* bench = app.add_subcommand("bench", "compare methods and subdivision steps");
    bench->add_option("--config", config_path, "INI configuration")->required();
    bench->add_option("--out", out_dir, "output directory");

    auto* gen = app.add_subcommand("gen-scene", "write the synthetic scene description");
    gen->add_option("--config", config_path, "INI configuration")->required();
    gen->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        h::Config config = h::load_config(config_path);
        if (!plane_flag.empty())
            config.pipeline.plane_estimation = plane_flag == "on";
        if (!method_name.empty())
            config.pipeline.method = lampdet::parse_method(method_name);
        if (step)
            config.pipeline.subdivision = *step;
        if (seed)
            config.scene.seed = *seed;
        config.scene.validate();
        config.pipeline.validate();

        if (*run) {
            print_summary(h::run_pipeline(config, std::filesystem::path(out_dir)));
        } else if (*bench) {
            const auto rows = h::run_benchmark(config, std::filesystem::path(out_dir));
            h::write_benchmark_csv(std::cout, rows);
        } else if (*gen) {
            h::write_scene(out_dir, h::gen_scene(config.scene));
            std::cout << "scene written to " << out_dir << '\n';
        }
    } catch (const lampdet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
