// Beep handling: latch once per trial, WebAudio playback in the browser.

export class BeepLatch {
  private fired = false;

  reset(): void {
    this.fired = false;
  }

  // True exactly once per trial, on the first state frame with beep set.
  shouldPlay(beepFlag: boolean): boolean {
    if (beepFlag && !this.fired) {
      this.fired = true;
      return true;
    }
    return false;
  }
}

export function playBeep(ctx: AudioContext, durationMs = 180, freqHz = 880): void {
  const osc = ctx.createOscillator();
  const gain = ctx.createGain();
  osc.frequency.value = freqHz;
  gain.gain.setValueAtTime(0.3, ctx.currentTime);
  gain.gain.exponentialRampToValueAtTime(1e-3, ctx.currentTime + durationMs / 1000);
  osc.connect(gain).connect(ctx.destination);
  osc.start();
  osc.stop(ctx.currentTime + durationMs / 1000);
}
