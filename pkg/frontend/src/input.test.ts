import { describe, expect, it } from "vitest";

import {
  HAND_MAX,
  InputThrottle,
  KeyVelocityIntegrator,
  mapDragToHand,
} from "./input.js";

describe("KeyVelocityIntegrator", () => {
  it("down arrow held one second advances 0.01 m", () => {
    const keys = new KeyVelocityIntegrator();
    keys.keyDown("ArrowDown");
    for (let i = 0; i < 60; i++) keys.step(1 / 60);
    expect(keys.hand).toBeCloseTo(0.01, 9);
  });

  it("up arrow extracts at 0.02 m/s and clamps at zero", () => {
    const keys = new KeyVelocityIntegrator();
    keys.hand = 0.01;
    keys.keyDown("ArrowUp");
    for (let i = 0; i < 30; i++) keys.step(1 / 60);
    expect(keys.hand).toBeCloseTo(0, 9);
    keys.step(1 / 60);
    expect(keys.hand).toBe(0);
  });

  it("clamps at the workspace maximum", () => {
    const keys = new KeyVelocityIntegrator();
    keys.hand = HAND_MAX - 1e-4;
    keys.keyDown("ArrowDown");
    for (let i = 0; i < 120; i++) keys.step(1 / 60);
    expect(keys.hand).toBe(HAND_MAX);
  });

  it("ignores unrelated keys and stops on release", () => {
    const keys = new KeyVelocityIntegrator();
    expect(keys.keyDown("a")).toBe(false);
    keys.keyDown("ArrowDown");
    keys.keyUp("ArrowDown");
    expect(keys.active).toBe(false);
    keys.step(1);
    expect(keys.hand).toBe(0);
  });
});

describe("mapDragToHand", () => {
  it("maps the canvas span linearly", () => {
    expect(mapDragToHand(0, 0, 480)).toBe(0);
    expect(mapDragToHand(240, 0, 480)).toBeCloseTo(HAND_MAX / 2, 12);
    expect(mapDragToHand(480, 0, 480)).toBe(HAND_MAX);
  });

  it("clamps drags outside the canvas", () => {
    expect(mapDragToHand(-50, 0, 480)).toBe(0);
    expect(mapDragToHand(2000, 0, 480)).toBe(HAND_MAX);
  });
});

describe("InputThrottle", () => {
  it("limits messages to the configured rate", () => {
    const throttle = new InputThrottle(1000 / 60);
    let sent = 0;
    for (let i = 0; i < 240; i++) {
      if (throttle.offer(i * 1e-5, i * (1000 / 240)) !== null) sent++;
    }
    expect(sent).toBeLessThanOrEqual(61);
    expect(sent).toBeGreaterThan(45);
  });

  it("sends nothing while the value is unchanged", () => {
    const throttle = new InputThrottle(1000 / 60);
    expect(throttle.offer(0.01, 0)).toBe(0.01);
    for (let i = 1; i < 100; i++) {
      expect(throttle.offer(0.01, i * 100)).toBeNull();
    }
  });

  it("rejects non-monotone timestamps", () => {
    const throttle = new InputThrottle(1000 / 60);
    expect(throttle.offer(0.01, 1000)).toBe(0.01);
    expect(throttle.offer(0.02, 900)).toBeNull();
  });
});
