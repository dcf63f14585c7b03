// Hand input: arrow-key velocity integration or canvas drag, throttled to
// the configured message rate. All positions are hand-space meters.

export const KEY_INSERT_SPEED = 0.01;  // m/s, matches the simulated operator
export const KEY_EXTRACT_SPEED = 0.02; // m/s
export const HAND_MAX = 0.06;          // m, server workspace clamp

export class KeyVelocityIntegrator {
  hand = 0;
  private down = false;
  private up = false;

  constructor(
    private insertSpeed = KEY_INSERT_SPEED,
    private extractSpeed = KEY_EXTRACT_SPEED,
    private handMax = HAND_MAX,
  ) {}

  keyDown(key: string): boolean {
    if (key === "ArrowDown") this.down = true;
    else if (key === "ArrowUp") this.up = true;
    else return false;
    return true;
  }

  keyUp(key: string): void {
    if (key === "ArrowDown") this.down = false;
    if (key === "ArrowUp") this.up = false;
  }

  get active(): boolean {
    return this.down || this.up;
  }

  step(dtSeconds: number): number {
    let v = 0;
    if (this.down) v += this.insertSpeed;
    if (this.up) v -= this.extractSpeed;
    this.hand = Math.min(Math.max(this.hand + v * dtSeconds, 0), this.handMax);
    return this.hand;
  }
}

// Canvas drag: vertical pixel position to hand depth, clamped to the
// workspace even when the pointer leaves the canvas.
export function mapDragToHand(
  y: number,
  topPx: number,
  bottomPx: number,
  handMax = HAND_MAX,
): number {
  const frac = (y - topPx) / (bottomPx - topPx);
  return Math.min(Math.max(frac, 0), 1) * handMax;
}

// Rate limiter: at most one message per interval, none when idle, and
// timestamps must be monotone.
export class InputThrottle {
  private lastValue: number | null = null;
  private lastSentMs = -Infinity;

  constructor(private minIntervalMs = 1000 / 60) {}

  offer(value: number, nowMs: number): number | null {
    if (nowMs < this.lastSentMs) return null;
    if (this.lastValue !== null && value === this.lastValue) return null;
    if (nowMs - this.lastSentMs < this.minIntervalMs) return null;
    this.lastValue = value;
    this.lastSentMs = nowMs;
    return value;
  }
}
