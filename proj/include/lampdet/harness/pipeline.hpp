#ifndef LAMPDET_HARNESS_PIPELINE_HPP
#define LAMPDET_HARNESS_PIPELINE_HPP

#include "lampdet/bim_plane.hpp"
#include "lampdet/cluster_report.hpp"
#include "lampdet/harness/config.hpp"
#include "lampdet/harness/scene.hpp"
#include "lampdet/refine.hpp"

#include <Eigen/Geometry>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace lampdet::harness
{

/// Raw per-frame output of candidate refinement, before plane estimation.
struct DetectionRun
{
    std::vector<Detection> detections;
    double refine_ms_total = 0.0;
    long refine_calls = 0;
    int frames = 0;
    int candidates = 0;

    double mean_refine_ms() const { return refine_calls ? refine_ms_total / refine_calls : 0.0; }
};

struct PipelineReport
{
    std::vector<Detection> detections; // after optional plane filtering and projection
    std::vector<Cluster> clusters;
    Report stats;
    int raw_detections = 0;
    int parallel_rays = 0; // inliers kept unprojected
    std::optional<PlaneEstimate> plane;
    double mean_refine_ms = 0.0;
    std::vector<std::string> warnings;
};

struct BenchmarkRow
{
    RefineMethod method = RefineMethod::D2CO_IT;
    double subdivision = 1.0;
    bool plane_estimation = false;
    double mean_refine_ms = 0.0;
    int detections = 0;
    double cluster_identification_pct = 0.0;
    double detection_identification_pct = 0.0;
    LocalizationStats localization;
};

/// Worker count: PIPELINE_THREADS when set, else the configured value.
inline int worker_count(int configured)
{
    if (const char* env = std::getenv("PIPELINE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1)
                return n;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("PIPELINE_THREADS must be a positive integer, got '") + env + "'");
    }
    return configured;
}

/// Ground truth perturbed by a random rotation about the model origin and a random translation.
inline Pose perturb_pose(const Pose& truth, double max_rotation, double max_translation, std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
    Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
    const double angle = max_rotation * unit(rng);
    const double dist = max_translation * unit(rng);
    if (axis.norm() < 1e-12)
        axis = Eigen::Vector3d::UnitX();
    if (dir.norm() < 1e-12)
        dir = Eigen::Vector3d::UnitX();
    Pose out = truth;
    out.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * truth.rotation;
    out.translation = truth.translation + dist * dir.normalized();
    return out;
}

/// Candidate score from the RMS per-edge distance in pixels, so models with many
/// edges compete fairly and scores accumulated over a cluster stay on one scale.
inline double candidate_score(const RefineResult& r, double sigma)
{
    if (r.visible_edges <= 0)
        return 0.0;
    RefineResult normalized = r;
    normalized.cost = std::sqrt(2.0 * r.cost / r.visible_edges);
    return score(normalized, sigma);
}

namespace detail
{
struct FrameOutput
{
    std::vector<Detection> detections;
    double refine_ms = 0.0;
    long refine_calls = 0;
    int candidates = 0;
};

inline FrameOutput refine_candidates(const Scene& scene, const PipelineConfig& p, const RenderedFrame& rf,
                                     const TensorSet& tensors, int frame)
{
    FrameOutput out;
    RefineOptions ropt;
    ropt.subdivision_fraction = p.subdivision;
    auto rng = make_rng(scene.config.seed, 2, static_cast<std::uint64_t>(frame));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Pose cam_to_world = rf.camera.inverse();
    const auto& catalog = lamp_catalog();

    for (const VisibleLamp& vl : rf.lamps) {
        ++out.candidates;
        const Pose init = perturb_pose(vl.pose, p.init_rotation_deg * std::numbers::pi / 180.0, p.init_translation, rng);
        const double depth_noise = p.depth_sigma * gauss(rng);
        int best_model = -1;
        double best_score = 0.0;
        Pose best_pose;
        for (const LampModel& model : catalog) {
            const auto t0 = std::chrono::steady_clock::now();
            const RefineResult r = refine(init, model.mesh, scene.camera, tensors, p.method, ropt);
            out.refine_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            ++out.refine_calls;
            // Discard fits that leave the image or the camera range.
            if (r.pose.translation.norm() > scene.config.max_range ||
                !inside_image(scene.camera, model.mesh, r.pose, 2.0))
                continue;
            const double s = candidate_score(r, p.score_sigma);
            if (s > best_score) {
                best_score = s;
                best_model = model.id;
                best_pose = r.pose;
            }
        }
        if (best_model < 0)
            continue;
        Detection d;
        d.frame_index = frame;
        d.model_id = best_model;
        d.score = best_score;
        d.state_on = vl.brightness > 0.5;
        d.camera_position = cam_to_world.translation;
        d.position = cam_to_world * best_pose.translation;
        const Eigen::Vector3d ray = d.position - d.camera_position;
        if (ray.norm() < 1e-9)
            continue;
        d.position += depth_noise * ray.normalized();
        out.detections.push_back(d);
    }
    return out;
}

/// Renders one frame and builds its tensors once, then refines for each configuration.
inline std::vector<FrameOutput> process_frame(const Scene& scene, const std::vector<PipelineConfig>& configs, int frame)
{
    std::vector<FrameOutput> out(configs.size());
    const RenderedFrame rf = render_synthetic_frame(scene, frame);
    if (rf.lamps.empty() || rf.segments.empty())
        return out;
    TensorOptions topt;
    topt.n_orient = configs.front().n_orient;
    topt.lambda_theta = configs.front().lambda_theta;
    topt.integral = false;
    for (const PipelineConfig& p : configs)
        topt.integral = topt.integral || p.method == RefineMethod::D2CO_IT;
    const TensorSet tensors = build_tensors(rf.segments, scene.camera.width, scene.camera.height, topt);
    for (std::size_t i = 0; i < configs.size(); ++i)
        out[i] = refine_candidates(scene, configs[i], rf, tensors, frame);
    return out;
}
} // namespace detail

/// Runs several configurations over the same rendered frames and tensors. Each result
/// equals a separate detect() call with that configuration. All configurations must
/// share the tensor settings (orientations, lambda_theta).
inline std::vector<DetectionRun> detect_batch(const Scene& scene, const std::vector<PipelineConfig>& configs)
{
    if (configs.empty())
        return {};
    for (const PipelineConfig& p : configs) {
        p.validate();
        if (p.n_orient != configs.front().n_orient || p.lambda_theta != configs.front().lambda_theta)
            throw ConfigError("batched configurations must share orientations and lambda_theta");
    }
    const int n = static_cast<int>(scene.trajectory.size());
    std::vector<std::vector<detail::FrameOutput>> frames(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto work = [&] {
        for (int f = next++; f < n; f = next++) {
            try {
                frames[static_cast<std::size_t>(f)] = detail::process_frame(scene, configs, f);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const int workers = std::min(worker_count(configs.front().threads), std::max(1, n));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    std::vector<DetectionRun> runs(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        DetectionRun& run = runs[i];
        run.frames = n;
        for (auto& frame : frames) {
            const detail::FrameOutput& f = frame[i];
            run.detections.insert(run.detections.end(), f.detections.begin(), f.detections.end());
            run.refine_ms_total += f.refine_ms;
            run.refine_calls += f.refine_calls;
            run.candidates += f.candidates;
        }
    }
    return runs;
}

/// Refines every visible lamp candidate against every catalog model; the best-scoring
/// model becomes the frame's detection. Frames run on a worker pool; output order is
/// by frame regardless of scheduling.
inline DetectionRun detect(const Scene& scene, const PipelineConfig& p)
{
    return detect_batch(scene, {p}).front();
}

/// Plane estimation (optional), projection, clustering and statistics.
inline PipelineReport summarize(const Scene& scene, const DetectionRun& run, const PipelineConfig& p, bool plane_estimation)
{
    PipelineReport rep;
    rep.raw_detections = static_cast<int>(run.detections.size());
    rep.mean_refine_ms = run.mean_refine_ms();
    rep.detections = run.detections;

    if (plane_estimation) {
        if (rep.detections.size() < 2) {
            if (!rep.detections.empty())
                rep.warnings.push_back("plane estimation skipped: fewer than 2 detections");
        } else {
            const BimSurface ceiling = closest_ceiling(scene.surfaces, rep.detections);
            MsacOptions mo;
            mo.max_distance = p.msac_max_distance;
            mo.iterations = p.msac_iterations;
            mo.seed = scene.config.seed;
            const PlaneEstimate est = msac_plane(ceiling.plane_normal, rep.detections, mo);
            std::vector<Detection> kept;
            for (std::size_t i = 0; i < rep.detections.size(); ++i) {
                if (!est.inlier_mask[i])
                    continue;
                Detection d = rep.detections[i];
                try {
                    d.position = project_detection(d, est);
                } catch (const ParallelRay&) {
                    ++rep.parallel_rays;
                }
                kept.push_back(d);
            }
            rep.detections = std::move(kept);
            rep.plane = est;
        }
    }
    rep.clusters = cluster(rep.detections, p.cluster_radius);
    rep.stats = compute_stats(rep.clusters, rep.detections, scene.references, p.link_radius);
    return rep;
}

inline BenchmarkRow make_row(RefineMethod method, double fraction, bool plane, const PipelineReport& r)
{
    BenchmarkRow row;
    row.method = method;
    row.subdivision = fraction;
    row.plane_estimation = plane;
    row.mean_refine_ms = r.mean_refine_ms;
    row.detections = static_cast<int>(r.detections.size());
    const Report& s = r.stats;
    row.cluster_identification_pct = s.linked_clusters ? 100.0 * s.correctly_identified / s.linked_clusters : 0.0;
    row.detection_identification_pct = s.linked_detections ? 100.0 * s.correct_detections / s.linked_detections : 0.0;
    row.localization = s.localization;
    return row;
}

/// Writes the report files of one run into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const Scene& scene, const PipelineReport& r)
{
    std::filesystem::create_directories(dir);
    const auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f)
            throw Error("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("detections.csv");
        write_detections_csv(f, r.detections);
    }
    {
        auto f = open("clusters.csv");
        write_clusters_csv(f, r.clusters, r.detections, scene.references);
    }
    {
        auto f = open("confusion.csv");
        std::vector<int> models;
        for (const auto& m : lamp_catalog())
            models.push_back(m.id);
        write_confusion_csv(f, r.stats.confusion, models);
    }
    {
        auto f = open("plot.svg");
        write_svg(f, r.clusters, r.detections, scene.references, "detections (top view)");
    }
    {
        auto f = open("bim_update.xml");
        write_bim_update(f, r.clusters);
    }
    {
        auto f = open("summary.csv");
        const Report& s = r.stats;
        f << std::setprecision(10) << "key,value\n"
          << "raw_detections," << r.raw_detections << '\n'
          << "detections," << r.detections.size() << '\n'
          << "clusters," << s.clusters << '\n'
          << "linked_clusters," << s.linked_clusters << '\n'
          << "correctly_identified_clusters," << s.correctly_identified << '\n'
          << "correct_states," << s.correct_states << '\n'
          << "correct_detections," << s.correct_detections << '\n'
          << "linked_detections," << s.linked_detections << '\n'
          << "mean_dist_to_center_cm," << s.localization.mean_dist_to_center << '\n'
          << "var_dist_to_center_cm2," << s.localization.var_dist_to_center << '\n'
          << "mean_dist_to_reference_cm," << s.localization.mean_dist_to_reference << '\n';
        if (r.plane)
            f << "plane_offset_m," << r.plane->offset << '\n' << "plane_inliers," << r.plane->inlier_count << '\n';
    }
}

inline PipelineReport run_pipeline(const Config& config, const std::optional<std::filesystem::path>& out_dir = {})
{
    const Scene scene = gen_scene(config.scene);
    const DetectionRun run = detect(scene, config.pipeline);
    PipelineReport rep = summarize(scene, run, config.pipeline, config.pipeline.plane_estimation);
    if (out_dir)
        write_outputs(*out_dir, scene, rep);
    return rep;
}

inline PipelineReport run_pipeline(const std::string& config_path, const std::optional<std::filesystem::path>& out_dir = {})
{
    return run_pipeline(load_config(config_path), out_dir);
}

inline void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows)
{
    out << "method,subdivision,plane_estimation,mean_refine_ms,detections,cluster_identification_pct,"
           "detection_identification_pct,mean_dist_to_center_cm,var_dist_to_center_cm2,mean_dist_to_reference_cm\n";
    out << std::setprecision(8);
    for (const auto& r : rows)
        out << to_string(r.method) << ',' << r.subdivision << ',' << (r.plane_estimation ? "on" : "off") << ','
            << r.mean_refine_ms << ',' << r.detections << ',' << r.cluster_identification_pct << ','
            << r.detection_identification_pct << ',' << r.localization.mean_dist_to_center << ','
            << r.localization.var_dist_to_center << ',' << r.localization.mean_dist_to_reference << '\n';
}

/// Three methods by four subdivision fractions, each summarized without and with plane estimation.
inline std::vector<BenchmarkRow> run_benchmark(const Config& config, const std::optional<std::filesystem::path>& out_dir = {})
{
    const Scene scene = gen_scene(config.scene);
    std::vector<PipelineConfig> configs;
    for (RefineMethod m : {RefineMethod::D2CO, RefineMethod::D2CO_E, RefineMethod::D2CO_IT})
        for (double fraction : {0.25, 0.5, 0.75, 1.0}) {
            PipelineConfig p = config.pipeline;
            p.method = m;
            p.subdivision = fraction;
            configs.push_back(p);
        }
    const std::vector<DetectionRun> runs = detect_batch(scene, configs);
    std::vector<BenchmarkRow> rows;
    for (std::size_t i = 0; i < configs.size(); ++i)
        for (bool plane : {false, true})
            rows.push_back(make_row(configs[i].method, configs[i].subdivision, plane,
                                    summarize(scene, runs[i], configs[i], plane)));
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream f(*out_dir / "benchmark.csv");
        if (!f)
            throw Error("cannot write " + (*out_dir / "benchmark.csv").string());
        write_benchmark_csv(f, rows);
    }
    return rows;
}

inline std::vector<BenchmarkRow> run_benchmark(const std::string& config_path,
                                               const std::optional<std::filesystem::path>& out_dir = {})
{
    return run_benchmark(load_config(config_path), out_dir);
}

/// Writes the scene description: gbXML surfaces, references, trajectory and lamp meshes.
inline void write_scene(const std::filesystem::path& dir, const Scene& scene)
{
    std::filesystem::create_directories(dir / "models");
    const auto write = [&](const std::filesystem::path& path, const auto& fn) {
        std::ofstream f(path);
        if (!f)
            throw Error("cannot write " + path.string());
        fn(f);
    };
    write(dir / "building.xml", [&](std::ostream& o) { write_gbxml(o, scene.surfaces); });
    write(dir / "references.csv", [&](std::ostream& o) { write_references_csv(o, scene.references); });
    write(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, scene.trajectory); });
    for (const auto& m : lamp_catalog())
        write(dir / "models" / (std::to_string(m.id) + "-" + m.name + ".mesh"),
              [&](std::ostream& o) { save_mesh(o, m.mesh); });
}

} // namespace lampdet::harness

#endif // LAMPDET_HARNESS_PIPELINE_HPP
