/** Orchestrates the trial loop: fetch trial -> play once -> unlock response
 * -> submit verbatim -> show feedback -> acknowledge -> next.
 *
 * A submission conflict (409) means this client drifted from the server
 * (double click, reload race); the controller resynchronizes from the
 * status endpoint instead of guessing.
 */

import { ApiError, SessionApi } from "./api.js";
import type { Player } from "./player.js";
import * as state from "./state.js";
import type { UiSessionState } from "./state.js";
import { GIVE_UP_TEXT } from "./types.js";

export type StateListener = (s: UiSessionState) => void;

export class SessionController {
  private state: UiSessionState;
  private readonly listeners: StateListener[] = [];

  constructor(
    private readonly api: SessionApi,
    private readonly player: Player,
    token: string,
    gain: number = state.DEFAULT_GAIN,
  ) {
    this.state = state.initialState(token, gain);
  }

  get current(): UiSessionState {
    return this.state;
  }

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  private update(next: UiSessionState): void {
    this.state = next;
    for (const listener of this.listeners) listener(next);
  }

  setGain(gain: number): void {
    this.update(state.setGain(this.state, gain));
  }

  giveUpText(): string {
    return GIVE_UP_TEXT;
  }

  /** Fetch and play the pending trial. Playback failures set the error flag
   * and leave the trial pending so the listener can retry. */
  async advance(): Promise<UiSessionState> {
    const trial = await this.api.nextTrial(this.state.token);
    this.update(state.onTrialReceived(this.state, trial));
    if (this.state.awaiting === "playback" && this.state.audioUrl) {
      await this.playPending();
    }
    return this.state;
  }

  async playPending(): Promise<UiSessionState> {
    if (this.state.awaiting !== "playback" || !this.state.audioUrl) {
      return this.state;
    }
    try {
      await this.player.play(this.api.resolve(this.state.audioUrl), this.state.gain);
      this.update(state.onPlaybackComplete(this.state));
    } catch (err) {
      this.update(state.onPlaybackError(this.state, String(err)));
    }
    return this.state;
  }

  /** Submit exactly what was typed. */
  async submit(text: string): Promise<UiSessionState> {
    if (!state.responseEnabled(this.state) || !this.state.stimulusId) {
      throw new Error("no response expected right now");
    }
    try {
      const feedback = await this.api.submitResponse(
        this.state.token,
        this.state.stimulusId,
        text,
      );
      this.update(state.onFeedback(this.state, feedback));
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        return this.resync();
      }
      throw err;
    }
    return this.state;
  }

  submitGiveUp(): Promise<UiSessionState> {
    return this.submit(GIVE_UP_TEXT);
  }

  /** Acknowledge feedback and move on. */
  async acknowledge(): Promise<UiSessionState> {
    if (this.state.awaiting !== "feedback") return this.state;
    this.update(state.onAcknowledge(this.state));
    return this.advance();
  }

  /** Rebuild from the server after a reload or conflict. */
  async resync(): Promise<UiSessionState> {
    const status = await this.api.status(this.state.token);
    this.update(state.fromStatus(status, this.state.gain));
    if (this.state.awaiting === "playback" && this.state.audioUrl) {
      await this.playPending();
    }
    return this.state;
  }
}

export async function startSession(
  api: SessionApi,
  player: Player,
  subject: string,
  options: { seed?: number; headphonesWired?: boolean; gain?: number } = {},
): Promise<SessionController> {
  const status = await api.createSession({
    subject,
    seed: options.seed,
    headphones_wired: options.headphonesWired ?? true,
  });
  return new SessionController(api, player, status.token, options.gain);
}
