/** UI session state and its pure transitions.
 *
 * The state is a function of the last server payloads plus the local gain,
 * so a page reload can rebuild it from the status endpoint. Two invariants
 * live here: the response box stays locked until playback completes, and the
 * calibration gain freezes the moment the testing phase begins.
 */

import type { Feedback, SessionStatus, TrialPayload } from "./types.js";

export type Awaiting = "playback" | "response" | "feedback" | "done";

export interface UiSessionState {
  token: string;
  phase: "training" | "testing" | "done";
  trialIndex: number;
  gain: number;
  gainLocked: boolean;
  awaiting: Awaiting;
  stimulusId: string | null;
  audioUrl: string | null;
  feedback: Feedback | null;
  error: string | null;
}

export const DEFAULT_GAIN = 0.5;

export function initialState(token: string, gain: number = DEFAULT_GAIN): UiSessionState {
  return {
    token,
    phase: "training",
    trialIndex: 0,
    gain,
    gainLocked: false,
    awaiting: "playback",
    stimulusId: null,
    audioUrl: null,
    feedback: null,
    error: null,
  };
}

/** Volume is a training-phase calibration; once testing starts it is fixed. */
export function setGain(state: UiSessionState, gain: number): UiSessionState {
  if (state.gainLocked) return state;
  return { ...state, gain: Math.min(1, Math.max(0, gain)) };
}

export function responseEnabled(state: UiSessionState): boolean {
  return state.awaiting === "response";
}

export function gainAdjustable(state: UiSessionState): boolean {
  return !state.gainLocked;
}

export function onTrialReceived(state: UiSessionState, trial: TrialPayload): UiSessionState {
  if (trial.completed) {
    return { ...state, phase: "done", awaiting: "done", stimulusId: null, audioUrl: null };
  }
  const phase = trial.phase === "testing" ? "testing" : "training";
  return {
    ...state,
    phase,
    gainLocked: state.gainLocked || phase === "testing",
    trialIndex: trial.trial_index ?? state.trialIndex,
    awaiting: "playback",
    stimulusId: trial.stimulus_id ?? null,
    audioUrl: trial.audio_url ?? null,
    feedback: null,
    error: null,
  };
}

export function onPlaybackComplete(state: UiSessionState): UiSessionState {
  if (state.awaiting !== "playback") return state;
  return { ...state, awaiting: "response" };
}

export function onPlaybackError(state: UiSessionState, message: string): UiSessionState {
  return { ...state, error: message };
}

export function onFeedback(state: UiSessionState, feedback: Feedback): UiSessionState {
  return {
    ...state,
    awaiting: feedback.completed ? "done" : "feedback",
    phase: feedback.completed ? "done" : state.phase,
    feedback,
  };
}

export function onAcknowledge(state: UiSessionState): UiSessionState {
  if (state.awaiting !== "feedback") return state;
  return { ...state, awaiting: "playback", feedback: null, stimulusId: null, audioUrl: null };
}

/** Rebuild after a reload: everything but the gain comes from the server. */
export function fromStatus(status: SessionStatus, gain: number): UiSessionState {
  const phase = status.phase;
  const served = status.served;
  return {
    token: status.token,
    phase,
    trialIndex: status.trials_completed,
    gain,
    gainLocked: phase !== "training",
    // a pending trial whose audio already played resumes at the response box
    awaiting:
      phase === "done" ? "done" : served && served.audio_fetched ? "response" : "playback",
    stimulusId: served ? served.stimulus_id : null,
    audioUrl: served ? served.audio_url : null,
    feedback: null,
    error: null,
  };
}
