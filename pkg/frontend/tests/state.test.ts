import { describe, expect, it } from "vitest";

import {
  fromStatus,
  gainAdjustable,
  initialState,
  onAcknowledge,
  onFeedback,
  onPlaybackComplete,
  onTrialReceived,
  responseEnabled,
  setGain,
} from "../src/state.js";
import type { Feedback, SessionStatus, TrialPayload } from "../src/types.js";

const trainingTrial: TrialPayload = {
  completed: false,
  phase: "training",
  trial_index: 0,
  stimulus_id: "train-000",
  audio_url: "/sessions/tok/audio/train-000",
};

const testingTrial: TrialPayload = {
  ...trainingTrial,
  phase: "testing",
  stimulus_id: "test-x",
  audio_url: "/sessions/tok/audio/test-x",
};

const feedback: Feedback = {
  target: "cat dog",
  percent_correct: 50,
  correct_phonemes: 3,
  total_phonemes: 6,
  phase: "training",
  completed: false,
};

describe("response gating", () => {
  it("keeps the response box locked until playback completes", () => {
    let s = onTrialReceived(initialState("tok"), trainingTrial);
    expect(s.awaiting).toBe("playback");
    expect(responseEnabled(s)).toBe(false);
    s = onPlaybackComplete(s);
    expect(responseEnabled(s)).toBe(true);
  });

  it("locks again after a response is submitted", () => {
    let s = onPlaybackComplete(onTrialReceived(initialState("tok"), trainingTrial));
    s = onFeedback(s, feedback);
    expect(responseEnabled(s)).toBe(false);
    expect(s.awaiting).toBe("feedback");
  });

  it("acknowledging feedback returns to the playback wait", () => {
    let s = onPlaybackComplete(onTrialReceived(initialState("tok"), trainingTrial));
    s = onAcknowledge(onFeedback(s, feedback));
    expect(s.awaiting).toBe("playback");
    expect(s.feedback).toBeNull();
  });
});

describe("calibration gain", () => {
  it("is adjustable during training and persists across trials", () => {
    let s = onTrialReceived(initialState("tok"), trainingTrial);
    s = setGain(s, 0.37);
    expect(s.gain).toBeCloseTo(0.37);
    s = onTrialReceived(onFeedback(onPlaybackComplete(s), feedback), trainingTrial);
    expect(s.gain).toBeCloseTo(0.37);
    expect(gainAdjustable(s)).toBe(true);
  });

  it("locks at the onset of testing and ignores later changes", () => {
    let s = setGain(onTrialReceived(initialState("tok"), trainingTrial), 0.8);
    s = onTrialReceived(s, testingTrial);
    expect(gainAdjustable(s)).toBe(false);
    const locked = setGain(s, 0.1);
    expect(locked.gain).toBeCloseTo(0.8);
  });

  it("stays locked even if a later payload looks like training", () => {
    let s = onTrialReceived(initialState("tok"), testingTrial);
    s = onTrialReceived(s, trainingTrial);
    expect(gainAdjustable(s)).toBe(false);
  });

  it("clamps to [0, 1]", () => {
    const s = setGain(initialState("tok"), 1.7);
    expect(s.gain).toBe(1);
  });
});

describe("completion and feedback", () => {
  it("a completed trial payload finishes the session", () => {
    const s = onTrialReceived(initialState("tok"), { completed: true });
    expect(s.phase).toBe("done");
    expect(s.awaiting).toBe("done");
  });

  it("completed feedback finishes the session", () => {
    let s = onPlaybackComplete(onTrialReceived(initialState("tok"), testingTrial));
    s = onFeedback(s, { ...feedback, completed: true });
    expect(s.phase).toBe("done");
  });
});

describe("reload resume", () => {
  const base: SessionStatus = {
    token: "tok",
    subject: "s1",
    location: "remote",
    phase: "testing",
    completed: false,
    trials_completed: 23,
    training_trials: 20,
    conditions: [["office", 8]],
    served: {
      stimulus_id: "test-x",
      audio_url: "/sessions/tok/audio/test-x",
      audio_fetched: true,
    },
    give_up_phrase: "i dont know",
  };

  it("resumes at the response box when audio already played", () => {
    const s = fromStatus(base, 0.42);
    expect(s.awaiting).toBe("response");
    expect(s.stimulusId).toBe("test-x");
    expect(s.gain).toBeCloseTo(0.42);
    expect(s.gainLocked).toBe(true);
  });

  it("resumes at playback when audio has not played", () => {
    const s = fromStatus(
      { ...base, served: { ...base.served!, audio_fetched: false } },
      0.42,
    );
    expect(s.awaiting).toBe("playback");
  });

  it("keeps the gain adjustable when still in training", () => {
    const s = fromStatus({ ...base, phase: "training", served: null }, 0.42);
    expect(s.gainLocked).toBe(false);
  });

  it("maps a finished session to done", () => {
    const s = fromStatus({ ...base, phase: "done", completed: true, served: null }, 0.5);
    expect(s.awaiting).toBe("done");
  });
});
