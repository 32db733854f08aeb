#ifndef LAMPDET_CLUSTER_REPORT_HPP
#define LAMPDET_CLUSTER_REPORT_HPP

#include "lampdet/bim_plane.hpp"
#include "lampdet/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace lampdet
{

struct Cluster
{
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    std::vector<std::size_t> members; // indices into the detection list
    std::map<int, double> accumulated_score;
    int winning_model = -1;
    bool state_on = true;
    std::optional<std::size_t> reference_id;
};

/// Ground-truth object for statistics.
struct Reference
{
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    int model_id = 0;
    bool state_on = true;
};

/// Model by largest accumulated score (ties to the lowest id); state by
/// score-weighted vote (ties to on).
inline std::pair<int, bool> identify(const Cluster& cluster, const std::vector<Detection>& detections)
{
    if (cluster.members.empty())
        throw InvalidArgument("identify: empty cluster");
    std::map<int, double> acc;
    double on = 0.0, off = 0.0;
    for (std::size_t i : cluster.members) {
        const Detection& d = detections.at(i);
        acc[d.model_id] += d.score;
        (d.state_on ? on : off) += d.score;
    }
    int best = acc.begin()->first;
    double best_score = acc.begin()->second;
    for (const auto& [model, s] : acc)
        if (s > best_score) {
            best = model;
            best_score = s;
        }
    return {best, on >= off};
}

/// Greedy clustering in frame order: each detection joins the nearest cluster whose
/// running-mean center lies within `radius`, otherwise it starts a new cluster.
inline std::vector<Cluster> cluster(const std::vector<Detection>& detections, double radius = 0.5)
{
    if (!(radius > 0.0))
        throw InvalidArgument("cluster: radius must be positive");
    std::vector<std::size_t> order(detections.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].frame_index < detections[b].frame_index;
    });

    std::vector<Cluster> out;
    for (std::size_t i : order) {
        const Eigen::Vector3d& p = detections[i].position;
        std::size_t best = out.size();
        double best_dist = radius;
        for (std::size_t c = 0; c < out.size(); ++c) {
            const double d = (out[c].center - p).norm();
            if (d <= best_dist) {
                best_dist = d;
                best = c;
            }
        }
        if (best == out.size()) {
            out.emplace_back();
            out.back().center = p;
            out.back().members.push_back(i);
            continue;
        }
        Cluster& c = out[best];
        c.members.push_back(i);
        c.center += (p - c.center) / static_cast<double>(c.members.size());
    }
    for (Cluster& c : out) {
        for (std::size_t i : c.members)
            c.accumulated_score[detections[i].model_id] += detections[i].score;
        std::tie(c.winning_model, c.state_on) = identify(c, detections);
    }
    return out;
}

struct ModelStats
{
    int detections = 0;
    double mean_dist_to_center = 0.0; // cm
    double var_dist_to_center = 0.0;  // cm^2
};

struct LocalizationStats
{
    double mean_dist_to_center = 0.0;    // cm
    double var_dist_to_center = 0.0;     // cm^2, population variance
    double mean_dist_to_reference = 0.0; // cm, over linked clusters
    std::map<int, ModelStats> per_model; // keyed by winning model of the cluster
};

/// counts[expected][detected] over detections in clusters linked to a reference.
struct ConfusionMatrix
{
    std::map<int, std::map<int, int>> counts;

    int total() const
    {
        int t = 0;
        for (const auto& [e, row] : counts)
            for (const auto& [d, n] : row)
                t += n;
        return t;
    }
    int trace() const
    {
        int t = 0;
        for (const auto& [e, row] : counts) {
            const auto it = row.find(e);
            if (it != row.end())
                t += it->second;
        }
        return t;
    }
};

struct Report
{
    LocalizationStats localization;
    ConfusionMatrix confusion;
    int detections = 0;
    int clusters = 0;
    int linked_clusters = 0;
    int correct_detections = 0;        // in a linked cluster whose reference has the detection's model
    int linked_detections = 0;         // detections in linked clusters
    int correctly_identified = 0;      // linked clusters whose winning model matches the reference
    int correct_states = 0;            // linked clusters whose state matches the reference
};

namespace detail
{
inline void mean_var(const std::vector<double>& v, double& mean, double& var)
{
    mean = var = 0.0;
    if (v.empty())
        return;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v)
        var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
}
} // namespace detail

/// Links clusters to references (greedy nearest pair first, each reference at most
/// once, within `link_radius` meters) and computes dispersion and identification
/// statistics. Distances are reported in centimeters.
inline Report compute_stats(std::vector<Cluster>& clusters, const std::vector<Detection>& detections,
                            const std::vector<Reference>& references, double link_radius = 0.5)
{
    Report rep;
    rep.detections = static_cast<int>(detections.size());
    rep.clusters = static_cast<int>(clusters.size());

    std::vector<double> all;
    std::map<int, std::vector<double>> by_model;
    for (const Cluster& c : clusters)
        for (std::size_t i : c.members) {
            const double d = 100.0 * (detections[i].position - c.center).norm();
            all.push_back(d);
            by_model[c.winning_model].push_back(d);
        }
    detail::mean_var(all, rep.localization.mean_dist_to_center, rep.localization.var_dist_to_center);
    for (const auto& [model, v] : by_model) {
        ModelStats& ms = rep.localization.per_model[model];
        ms.detections = static_cast<int>(v.size());
        detail::mean_var(v, ms.mean_dist_to_center, ms.var_dist_to_center);
    }

    for (Cluster& c : clusters)
        c.reference_id.reset();
    struct Pair
    {
        double dist;
        std::size_t cluster, reference;
    };
    std::vector<Pair> pairs;
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (std::size_t r = 0; r < references.size(); ++r) {
            const double d = (clusters[c].center - references[r].position).norm();
            if (d <= link_radius)
                pairs.push_back({d, c, r});
        }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
    std::vector<bool> ref_used(references.size(), false);
    double ref_sum = 0.0;
    for (const Pair& p : pairs) {
        if (ref_used[p.reference] || clusters[p.cluster].reference_id)
            continue;
        ref_used[p.reference] = true;
        clusters[p.cluster].reference_id = p.reference;
        ref_sum += 100.0 * p.dist;
        ++rep.linked_clusters;
    }
    if (rep.linked_clusters > 0)
        rep.localization.mean_dist_to_reference = ref_sum / rep.linked_clusters;

    for (const Cluster& c : clusters) {
        if (!c.reference_id)
            continue;
        const Reference& ref = references[*c.reference_id];
        rep.correctly_identified += c.winning_model == ref.model_id ? 1 : 0;
        rep.correct_states += c.state_on == ref.state_on ? 1 : 0;
        for (std::size_t i : c.members) {
            ++rep.linked_detections;
            ++rep.confusion.counts[ref.model_id][detections[i].model_id];
            rep.correct_detections += detections[i].model_id == ref.model_id ? 1 : 0;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Output

/// Detections as CSV: frame,model_id,score,state,px,py,pz,cx,cy,cz (state is on/off).
inline void write_detections_csv(std::ostream& out, const std::vector<Detection>& detections)
{
    out << "frame,model_id,score,state,px,py,pz,cx,cy,cz\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& d : detections)
        out << d.frame_index << ',' << d.model_id << ',' << d.score << ',' << (d.state_on ? "on" : "off") << ','
            << d.position.x() << ',' << d.position.y() << ',' << d.position.z() << ',' << d.camera_position.x()
            << ',' << d.camera_position.y() << ',' << d.camera_position.z() << '\n';
}

inline std::vector<Detection> read_detections_csv(std::istream& in)
{
    std::vector<Detection> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.rfind("frame", 0) == 0)
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 10)
            throw ParseError("detections csv: expected 10 fields", line_no);
        try {
            Detection d;
            d.frame_index = std::stoi(f[0]);
            d.model_id = std::stoi(f[1]);
            d.score = std::stod(f[2]);
            if (f[3] != "on" && f[3] != "off")
                throw ParseError("detections csv: state must be on or off", line_no);
            d.state_on = f[3] == "on";
            d.position = {std::stod(f[4]), std::stod(f[5]), std::stod(f[6])};
            d.camera_position = {std::stod(f[7]), std::stod(f[8]), std::stod(f[9])};
            out.push_back(d);
        } catch (const std::invalid_argument&) {
            throw ParseError("detections csv: malformed number", line_no);
        } catch (const std::out_of_range&) {
            throw ParseError("detections csv: number out of range", line_no);
        }
    }
    return out;
}

inline void write_clusters_csv(std::ostream& out, const std::vector<Cluster>& clusters,
                               const std::vector<Detection>& detections, const std::vector<Reference>& references)
{
    out << "cluster,cx,cy,cz,members,model_id,state,reference,ref_dist_cm,mean_member_dist_cm\n";
    out << std::setprecision(10);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const Cluster& c = clusters[i];
        double mean = 0.0;
        for (std::size_t m : c.members)
            mean += 100.0 * (detections[m].position - c.center).norm();
        mean /= static_cast<double>(std::max<std::size_t>(1, c.members.size()));
        out << i << ',' << c.center.x() << ',' << c.center.y() << ',' << c.center.z() << ',' << c.members.size() << ','
            << c.winning_model << ',' << (c.state_on ? "on" : "off") << ',';
        if (c.reference_id)
            out << *c.reference_id << ',' << 100.0 * (c.center - references[*c.reference_id].position).norm();
        else
            out << ",";
        out << ',' << mean << '\n';
    }
}

inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m, const std::vector<int>& models)
{
    out << "expected\\detected";
    for (int d : models)
        out << ',' << d;
    out << '\n';
    for (int e : models) {
        out << e;
        const auto row = m.counts.find(e);
        for (int d : models) {
            int n = 0;
            if (row != m.counts.end()) {
                const auto it = row->second.find(d);
                n = it == row->second.end() ? 0 : it->second;
            }
            out << ',' << n;
        }
        out << '\n';
    }
}

/// Top view (x right, y up) of detections, cluster centers and references.
inline void write_svg(std::ostream& out, const std::vector<Cluster>& clusters, const std::vector<Detection>& detections,
                      const std::vector<Reference>& references, const std::string& title = "")
{
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
    double minx = std::numeric_limits<double>::infinity(), miny = minx;
    double maxx = -minx, maxy = -minx;
    const auto grow = [&](const Eigen::Vector3d& p) {
        minx = std::min(minx, p.x());
        maxx = std::max(maxx, p.x());
        miny = std::min(miny, p.y());
        maxy = std::max(maxy, p.y());
    };
    for (const auto& d : detections)
        grow(d.position);
    for (const auto& r : references)
        grow(r.position);
    if (!std::isfinite(minx)) {
        minx = miny = 0.0;
        maxx = maxy = 1.0;
    }
    const double size = 600.0, margin = 30.0;
    const double span = std::max({maxx - minx, maxy - miny, 1e-3});
    const double k = (size - 2 * margin) / span;
    const auto sx = [&](double x) { return margin + (x - minx) * k; };
    const auto sy = [&](double y) { return size - margin - (y - miny) * k; };
    const auto color = [&](int model) { return palette[((model % 7) + 7) % 7]; };

    out << std::setprecision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        out << "<text x=\"" << margin << "\" y=\"18\" font-size=\"14\">" << title << "</text>\n";
    for (const auto& d : detections)
        out << "<circle cx=\"" << sx(d.position.x()) << "\" cy=\"" << sy(d.position.y())
            << "\" r=\"2\" fill=\"" << color(d.model_id) << "\" fill-opacity=\"0.5\"/>\n";
    for (const auto& r : references)
        out << "<circle cx=\"" << sx(r.position.x()) << "\" cy=\"" << sy(r.position.y())
            << "\" r=\"7\" fill=\"none\" stroke=\"black\"/>\n";
    for (const auto& c : clusters) {
        const double x = sx(c.center.x()), y = sy(c.center.y());
        out << "<path d=\"M" << x - 5 << ' ' << y - 5 << " L" << x + 5 << ' ' << y + 5 << " M" << x - 5 << ' '
            << y + 5 << " L" << x + 5 << ' ' << y - 5 << "\" stroke=\"" << color(c.winning_model)
            << "\" stroke-width=\"2\"/>\n";
    }
    out << "</svg>\n";
}

/// Lamp list for the building model: one element per cluster.
inline void write_bim_update(std::ostream& out, const std::vector<Cluster>& clusters)
{
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<LampList>\n" << std::setprecision(10);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const Cluster& c = clusters[i];
        out << "  <Lamp id=\"lamp-" << i << "\" model=\"" << c.winning_model << "\" state=\""
            << (c.state_on ? "on" : "off") << "\" detections=\"" << c.members.size() << "\">\n"
            << "    <CartesianPoint><Coordinate>" << c.center.x() << "</Coordinate><Coordinate>" << c.center.y()
            << "</Coordinate><Coordinate>" << c.center.z() << "</Coordinate></CartesianPoint>\n  </Lamp>\n";
    }
    out << "</LampList>\n";
}

} // namespace lampdet

#endif // LAMPDET_CLUSTER_REPORT_HPP
