/** DOM bootstrap. All behavior lives in the controller and the pure state
 * module; this file only binds elements and re-renders on state change. */

import { SessionApi } from "./api.js";
import { SessionController, startSession } from "./controller.js";
import { HtmlAudioPlayer } from "./player.js";
import { gainAdjustable, responseEnabled } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const api = new SessionApi(window.location.origin);
let controller: SessionController | null = null;

const startPanel = el<HTMLDivElement>("start-panel");
const sessionPanel = el<HTMLDivElement>("session-panel");
const donePanel = el<HTMLDivElement>("done-panel");
const subjectInput = el<HTMLInputElement>("subject");
const wiredCheckbox = el<HTMLInputElement>("wired");
const startButton = el<HTMLButtonElement>("start");
const gainSlider = el<HTMLInputElement>("gain");
const gainNote = el<HTMLSpanElement>("gain-note");
const phaseLine = el<HTMLDivElement>("phase-line");
const playStatus = el<HTMLDivElement>("play-status");
const retryButton = el<HTMLButtonElement>("retry");
const responseBox = el<HTMLTextAreaElement>("response");
const submitButton = el<HTMLButtonElement>("submit");
const giveUpButton = el<HTMLButtonElement>("give-up");
const feedbackPanel = el<HTMLDivElement>("feedback");
const feedbackText = el<HTMLDivElement>("feedback-text");
const ackButton = el<HTMLButtonElement>("acknowledge");
const exportLink = el<HTMLAnchorElement>("export-link");

function render(): void {
  if (!controller) return;
  const s = controller.current;
  startPanel.hidden = true;
  sessionPanel.hidden = s.phase === "done";
  donePanel.hidden = s.phase !== "done";

  phaseLine.textContent =
    s.phase === "done" ? "Session complete" : `Phase: ${s.phase} — trial ${s.trialIndex + 1}`;

  gainSlider.disabled = !gainAdjustable(s);
  gainSlider.value = String(s.gain);
  gainNote.textContent = gainAdjustable(s)
    ? "Set a comfortable volume now; it locks when testing begins."
    : "Volume locked for the testing phase.";

  const canType = responseEnabled(s);
  responseBox.disabled = !canType;
  submitButton.disabled = !canType;
  giveUpButton.disabled = !canType;
  playStatus.textContent =
    s.awaiting === "playback" ? (s.error ? "Playback failed." : "Playing…") : "";
  retryButton.hidden = !(s.awaiting === "playback" && s.error);

  feedbackPanel.hidden = s.awaiting !== "feedback";
  if (s.feedback) {
    feedbackText.textContent =
      `The sentence was: "${s.feedback.target}" — ` +
      `${s.feedback.percent_correct.toFixed(0)}% of phonemes correct ` +
      `(${s.feedback.correct_phonemes}/${s.feedback.total_phonemes}).`;
  }
  if (s.phase === "done") {
    exportLink.href = `/sessions/${s.token}/export`;
  }
}

async function begin(): Promise<void> {
  startButton.disabled = true;
  try {
    controller = await startSession(api, new HtmlAudioPlayer(), subjectInput.value.trim(), {
      headphonesWired: wiredCheckbox.checked,
      gain: Number(gainSlider.value),
    });
    controller.onChange(render);
    await controller.advance();
  } finally {
    startButton.disabled = false;
  }
}

startButton.addEventListener("click", () => void begin());
gainSlider.addEventListener("input", () => controller?.setGain(Number(gainSlider.value)));
retryButton.addEventListener("click", () => void controller?.playPending());
giveUpButton.addEventListener("click", () => {
  if (controller) {
    responseBox.value = "";
    void controller.submitGiveUp();
  }
});

async function submitTyped(): Promise<void> {
  if (!controller) return;
  const text = responseBox.value; // verbatim: no trimming
  responseBox.value = "";
  await controller.submit(text);
}

submitButton.addEventListener("click", () => void submitTyped());
responseBox.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter" && !ev.shiftKey) {
    ev.preventDefault();
    void submitTyped();
  }
});
ackButton.addEventListener("click", () => void controller?.acknowledge());
document.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter" && controller?.current.awaiting === "feedback") {
    ev.preventDefault();
    void controller.acknowledge();
  }
});
