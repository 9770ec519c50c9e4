import { describe, expect, it } from "vitest";
import { bundleDelta, bundleKey, formatMetric, visibleColumns } from "../src/comparison";
import type { MetricBundlePayload } from "../src/types";

function bundle(overrides: Partial<MetricBundlePayload>): MetricBundlePayload {
  return {
    dimension_id: "pricing_model",
    model_name: "a",
    prompt_version: 1,
    n_samples: 100,
    accuracy_avg: null,
    f1_avg: null,
    self_consistency: null,
    jaccard_mean: null,
    lenient_accuracy: null,
    micro: null,
    sample: null,
    ...overrides,
  };
}

describe("bundle comparison", () => {
  it("reports the self-consistency delta between two models", () => {
    const a = bundle({ model_name: "model-a", self_consistency: 0.947 });
    const b = bundle({ model_name: "model-b", self_consistency: 0.888 });
    const delta = bundleDelta(a, b);
    expect(delta.self_consistency).toBeCloseTo(0.059, 9);
  });

  it("only differences both bundles define appear", () => {
    const a = bundle({ f1_avg: 0.8, self_consistency: 0.9 });
    const b = bundle({ self_consistency: 0.85 });
    const delta = bundleDelta(a, b);
    expect(delta.f1_avg).toBeUndefined();
    expect(delta.self_consistency).toBeCloseTo(0.05, 9);
  });

  it("hides columns no bundle defines", () => {
    const bundles = [
      bundle({ accuracy_avg: 0.9, f1_avg: 0.8, self_consistency: 0.95 }),
      bundle({ model_name: "b", accuracy_avg: 0.85, f1_avg: 0.7, self_consistency: 0.9 }),
    ];
    const keys = visibleColumns(bundles).map((c) => c.key);
    expect(keys).toEqual(["accuracy_avg", "f1_avg", "self_consistency"]);
  });

  it("includes nested micro/sample metrics when present", () => {
    const bundles = [bundle({
      micro: { precision: 0.7, recall: 0.8, f1: 0.75, undefined_terms: 0 },
      sample: { precision: 0.9, recall: 0.9, f1: 0.9, undefined_terms: 0 },
    })];
    const keys = visibleColumns(bundles).map((c) => c.key);
    expect(keys).toContain("micro_f1");
    expect(keys).toContain("sample_precision");
  });

  it("formats undefined metrics as a dash, values to four decimals", () => {
    expect(formatMetric(null)).toBe("–");
    expect(formatMetric(2 / 3)).toBe("0.6667");
  });

  it("labels bundles by model and prompt version", () => {
    expect(bundleKey(bundle({ model_name: "mock", prompt_version: 3 }))).toBe("mock v3");
  });
});
