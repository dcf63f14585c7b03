// Wire schema of the /session WebSocket. Parsing picks exactly the schema
// fields, so nothing outside the contract can ever reach the view state.

export type Modality = "HF" | "VF" | "CF" | "CCF";

export const MODALITIES: Modality[] = ["HF", "VF", "CF", "CCF"];

export interface StateMessage {
  type: "state";
  t: number;
  needle_pct: number;
  tissue_pct: number;
  visual_bar: number;
  index_stress: number;
  thumb_stress: number;
  phase: string;
  beep: boolean;
}

export interface AckMessage {
  type: "ack";
  trial_id: number;
}

export interface TrialDoneMessage {
  type: "trial_done";
  metrics: Record<string, number | boolean | string | null>;
}

export interface ErrorMessage {
  type: "error";
  code: string;
}

export type ServerMessage = StateMessage | AckMessage | TrialDoneMessage | ErrorMessage;

export interface StartTrialRequest {
  modality: Modality;
  fixture_depth?: number;
  feedback_delay_ms?: number;
  timeout_s?: number;
  perturbation?: boolean;
}

const STATE_NUMBERS = [
  "t", "needle_pct", "tissue_pct", "visual_bar", "index_stress", "thumb_stress",
] as const;

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;

  switch (msg.type) {
    case "state": {
      for (const key of STATE_NUMBERS) {
        if (typeof msg[key] !== "number" || !Number.isFinite(msg[key])) return null;
      }
      if (typeof msg.phase !== "string" || typeof msg.beep !== "boolean") return null;
      return {
        type: "state",
        t: msg.t as number,
        needle_pct: msg.needle_pct as number,
        tissue_pct: msg.tissue_pct as number,
        visual_bar: msg.visual_bar as number,
        index_stress: msg.index_stress as number,
        thumb_stress: msg.thumb_stress as number,
        phase: msg.phase,
        beep: msg.beep,
      };
    }
    case "ack":
      if (typeof msg.trial_id !== "number") return null;
      return { type: "ack", trial_id: msg.trial_id };
    case "trial_done":
      if (typeof msg.metrics !== "object" || msg.metrics === null) return null;
      return {
        type: "trial_done",
        metrics: msg.metrics as TrialDoneMessage["metrics"],
      };
    case "error":
      if (typeof msg.code !== "string") return null;
      return { type: "error", code: msg.code };
    default:
      return null;
  }
}

export function inputMessage(handZ: number): string {
  return JSON.stringify({ type: "input", hand_z: handZ });
}

export function startTrialMessage(request: StartTrialRequest): string {
  return JSON.stringify({ type: "start_trial", ...request });
}

export function abortMessage(): string {
  return JSON.stringify({ type: "abort" });
}
