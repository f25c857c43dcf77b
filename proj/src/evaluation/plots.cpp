#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "artmetric/evaluation.hpp"

// Small self-contained renderers; the CSVs next to each plot are the
// authoritative numbers, these are for eyeballing.

namespace artmetric::evaluation {

namespace {

const cv::Scalar kWhite(255, 255, 255);
const cv::Scalar kBlack(30, 30, 30);
const cv::Scalar kPalette[] = {
    cv::Scalar(180, 119, 31),  cv::Scalar(14, 127, 255),  cv::Scalar(44, 160, 44),
    cv::Scalar(40, 39, 214),   cv::Scalar(189, 103, 148), cv::Scalar(75, 86, 140),
};

void put_text(cv::Mat& img, const std::string& s, int x, int y, double scale = 0.38) {
  cv::putText(img, s, {x, y}, cv::FONT_HERSHEY_SIMPLEX, scale, kBlack, 1, cv::LINE_AA);
}

struct Axes {
  cv::Rect area;
  double x0, x1, y0, y1;
  cv::Point map(double x, double y) const {
    const double fx = (x - x0) / (x1 - x0 + 1e-12);
    const double fy = (y - y0) / (y1 - y0 + 1e-12);
    return {area.x + static_cast<int>(fx * area.width),
            area.y + area.height - static_cast<int>(fy * area.height)};
  }
};

void draw_axes(cv::Mat& img, const Axes& ax, const std::string& xlabel,
               const std::string& ylabel) {
  cv::rectangle(img, ax.area, kBlack, 1);
  put_text(img, xlabel, ax.area.x + ax.area.width / 2 - 20, ax.area.y + ax.area.height + 28);
  put_text(img, ylabel, 8, ax.area.y - 8);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", ax.y1);
  put_text(img, buf, 8, ax.area.y + 10);
  std::snprintf(buf, sizeof(buf), "%.3g", ax.y0);
  put_text(img, buf, 8, ax.area.y + ax.area.height);
  std::snprintf(buf, sizeof(buf), "%.3g", ax.x0);
  put_text(img, buf, ax.area.x - 4, ax.area.y + ax.area.height + 14);
  std::snprintf(buf, sizeof(buf), "%.3g", ax.x1);
  put_text(img, buf, ax.area.x + ax.area.width - 16, ax.area.y + ax.area.height + 14);
}

}  // namespace

void plot_confusion(const ConfusionMatrix& m, const std::string& path) {
  const int k = static_cast<int>(m.labels.size());
  const int cell = 64, margin = 130;
  cv::Mat img(margin + k * cell + 30, margin + k * cell + 30, CV_8UC3, kWhite);
  long long mx = 1;
  for (const auto& row : m.counts)
    for (long long v : row) mx = std::max(mx, v);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double f = static_cast<double>(m.counts[i][j]) / static_cast<double>(mx);
      const int shade = 255 - static_cast<int>(f * 205.0);
      cv::Rect cellRect(margin + j * cell, margin + i * cell, cell, cell);
      cv::rectangle(img, cellRect, cv::Scalar(shade, shade, 255), cv::FILLED);
      cv::rectangle(img, cellRect, kBlack, 1);
      put_text(img, std::to_string(m.counts[i][j]), cellRect.x + 8, cellRect.y + cell / 2 + 4);
    }
  for (int i = 0; i < k; ++i) {
    put_text(img, m.labels[i].substr(0, 14), 6, margin + i * cell + cell / 2);
    put_text(img, m.labels[i].substr(0, 8), margin + i * cell + 4, margin - 10);
  }
  put_text(img, "rows: true / cols: predicted", 6, 20, 0.45);
  cv::imwrite(path, img);
}

void plot_loss_curve(const std::vector<siamese::CurvePoint>& curve, const std::string& path) {
  cv::Mat img(420, 640, CV_8UC3, kWhite);
  double ymax = 1e-9;
  for (const auto& p : curve) ymax = std::max({ymax, p.train_loss, p.val_loss});
  Axes ax{cv::Rect(70, 40, 520, 320), 0.0, static_cast<double>(curve.back().epoch), 0.0,
          ymax * 1.05};
  draw_axes(img, ax, "epoch", "loss");
  for (size_t i = 1; i < curve.size(); ++i) {
    cv::line(img, ax.map(curve[i - 1].epoch, curve[i - 1].train_loss),
             ax.map(curve[i].epoch, curve[i].train_loss), kPalette[1], 2, cv::LINE_AA);
    cv::line(img, ax.map(curve[i - 1].epoch, curve[i - 1].val_loss),
             ax.map(curve[i].epoch, curve[i].val_loss), kPalette[0], 2, cv::LINE_AA);
  }
  cv::line(img, {460, 20}, {490, 20}, kPalette[1], 2);
  put_text(img, "train", 495, 24);
  cv::line(img, {540, 20}, {570, 20}, kPalette[0], 2);
  put_text(img, "val", 575, 24);
  cv::imwrite(path, img);
}

void plot_retrieval(const std::vector<RetrievalSummary>& summaries, const std::string& path) {
  cv::Mat img(420, 640, CV_8UC3, kWhite);
  int n_max = 1;
  for (const auto& s : summaries)
    for (const auto& e : s.per_n) n_max = std::max(n_max, e.n);
  Axes ax{cv::Rect(70, 40, 520, 320), 1.0, static_cast<double>(n_max), 0.0, 1.0};
  draw_axes(img, ax, "n", "P(n)");
  int ci = 0;
  for (const auto& s : summaries) {
    const cv::Scalar color = kPalette[ci % 6];
    cv::Point prev(-1, -1);
    for (const auto& e : s.per_n) {
      if (!e.probability) continue;
      cv::Point pt = ax.map(e.n, *e.probability);
      if (prev.x >= 0) cv::line(img, prev, pt, color, 2, cv::LINE_AA);
      cv::circle(img, pt, 3, color, cv::FILLED);
      prev = pt;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "T=%g", s.threshold);
    cv::line(img, {80 + ci * 100, 20}, {104 + ci * 100, 20}, color, 2);
    put_text(img, buf, 108 + ci * 100, 24);
    ++ci;
  }
  cv::imwrite(path, img);
}

void plot_evidence(const attribution::AttributionReport& report, const std::string& path) {
  const int rows = 120 + 24 * static_cast<int>(report.per_artist.size());
  cv::Mat img(rows, 720, CV_8UC3, kWhite);
  put_text(img, "query: " + report.query, 12, 24, 0.45);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "decision: %s   (T=%g)", report.decision.c_str(),
                report.threshold_used);
  put_text(img, buf, 12, 48, 0.45);
  put_text(img, "artist              min_d     P        votes   nearest", 12, 78, 0.42);
  int y = 102;
  for (const auto& f : report.per_artist) {
    char line[256];
    if (f.probability)
      std::snprintf(line, sizeof(line), "%-18s %8.4f  %6.4f  %5d   %s", f.artist.c_str(),
                    f.min_distance, *f.probability, f.vote_count, f.nearest_reference.c_str());
    else
      std::snprintf(line, sizeof(line), "%-18s %8.4f  no support  %3d   %s", f.artist.c_str(),
                    f.min_distance, f.vote_count, f.nearest_reference.c_str());
    put_text(img, line, 12, y, 0.42);
    y += 24;
  }
  cv::imwrite(path, img);
}

}  // namespace artmetric::evaluation
