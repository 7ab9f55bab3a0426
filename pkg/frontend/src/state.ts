import type { IndicatorType, LabelValue, ReportPayload } from "./api";
import { buildChunks, indicatorKey, SpanError, type Chunk } from "./highlight";

export type Mode = "blind" | "guided";

export interface IndicatorState {
  key: string;
  value: string;
  type: IndicatorType;
  machine: { label: LabelValue; justifications: string[] } | null;
  myLabel: LabelValue | null;
  comments: string[];
}

export interface ViewState {
  reportId: string;
  sourceName: string;
  mode: Mode;
  sessionState: "Open" | "AwaitingSenior" | "Finalized";
  indicators: Record<string, IndicatorState>;
  chunks: Chunk[];
  occurrenceCount: number;
  selection: string | null;
  error: string | null;
  toast: string | null;
}

/** Lay the payload out for rendering; span problems yield an error-only state. */
export function viewFromPayload(payload: ReportPayload): ViewState {
  const base: ViewState = {
    reportId: payload.report_id,
    sourceName: payload.source_name,
    mode: payload.mode,
    sessionState: payload.state,
    indicators: {},
    chunks: [],
    occurrenceCount: 0,
    selection: null,
    error: null,
    toast: null,
  };
  for (const indicator of payload.indicators) {
    const key = indicatorKey(indicator.type, indicator.value);
    base.indicators[key] = {
      key,
      value: indicator.value,
      type: indicator.type,
      machine: indicator.machine ?? null,
      myLabel: indicator.my_label?.label ?? null,
      comments: indicator.my_label?.comments ?? [],
    };
  }
  try {
    const plan = buildChunks(payload.text, payload.indicators);
    return { ...base, chunks: plan.chunks, occurrenceCount: plan.occurrenceCount };
  } catch (error) {
    if (error instanceof SpanError) {
      return { ...base, indicators: {}, error: error.message };
    }
    throw error;
  }
}

export function unlabeledCount(view: ViewState): number {
  return Object.values(view.indicators).filter((ind) => ind.myLabel === null).length;
}

/**
 * The label the analyst currently sees on an indicator: their own when
 * given, otherwise the machine suggestion (which the server only includes
 * when the mode allows it), otherwise nothing.
 */
export function displayedLabel(indicator: IndicatorState): LabelValue | null {
  return indicator.myLabel ?? indicator.machine?.label ?? null;
}

export type HighlightColor = "red" | "green" | "blue";

export function colorOf(indicator: IndicatorState): HighlightColor {
  const shown = displayedLabel(indicator);
  if (shown === "IoC") return "red";
  if (shown === "nonIoC") return "green";
  return "blue";
}

/** Clicking flips whatever is displayed; an unmarked indicator turns IoC. */
export function nextLabel(indicator: IndicatorState): LabelValue {
  return displayedLabel(indicator) === "IoC" ? "nonIoC" : "IoC";
}

export function withMyLabel(view: ViewState, key: string, label: LabelValue | null): ViewState {
  const indicator = view.indicators[key];
  if (indicator === undefined) return view;
  return {
    ...view,
    indicators: { ...view.indicators, [key]: { ...indicator, myLabel: label } },
  };
}

export function withSelection(view: ViewState, key: string | null): ViewState {
  return { ...view, selection: key };
}

export function withToast(view: ViewState, toast: string | null): ViewState {
  return { ...view, toast };
}
