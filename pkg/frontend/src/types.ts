/** Wire types for the session service (JSON bodies documented server-side). */

export interface CreateSessionRequest {
  subject: string;
  seed?: number;
  location?: string;
  headphones_wired?: boolean;
}

export interface ServedStimulus {
  stimulus_id: string;
  audio_url: string;
  audio_fetched: boolean;
}

export interface SessionStatus {
  token: string;
  subject: string;
  location: string;
  phase: "training" | "testing" | "done";
  completed: boolean;
  trials_completed: number;
  training_trials: number;
  conditions: [string, number][];
  served: ServedStimulus | null;
  give_up_phrase: string;
}

export interface TrialPayload {
  completed: boolean;
  phase?: "training" | "testing" | "done";
  trial_index?: number;
  stimulus_id?: string;
  room?: string;
  channels?: number;
  audio_url?: string;
}

export interface Feedback {
  target: string;
  percent_correct: number;
  correct_phonemes: number;
  total_phonemes: number;
  phase: string;
  completed: boolean;
}

/** The exact text the give-up button transmits; the server normalizes it. */
export const GIVE_UP_TEXT = "I don't know";
