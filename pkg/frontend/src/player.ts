/** Stimulus playback behind a small interface so the controller can be
 * driven headlessly in tests. The browser implementation applies the
 * calibration gain multiplicatively and nothing else: stimuli arrive fully
 * rendered from the server.
 */

export interface Player {
  /** Play the stimulus once; resolve when playback has finished. */
  play(url: string, gain: number): Promise<void>;
}

export class HtmlAudioPlayer implements Player {
  play(url: string, gain: number): Promise<void> {
    return new Promise((resolve, reject) => {
      const audio = new Audio();
      audio.preload = "auto";
      audio.volume = Math.min(1, Math.max(0, gain));
      audio.onended = () => resolve();
      audio.onerror = () => reject(new Error(`audio load failed: ${url}`));
      audio.src = url;
      void audio.play().catch(reject);
    });
  }
}
