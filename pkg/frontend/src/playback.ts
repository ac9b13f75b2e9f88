/** Playback clock for tracklet replay: play/pause, scrub, single-step.
 *
 * One clock instance is the single source of truth for the frame cursor, so
 * the BEV canvas and the metric-curve cursor marker can never disagree.
 */

export class PlaybackClock {
  private index = 0;
  private accumulator = 0;
  playing = false;
  speed = 1.0;

  constructor(
    public frames: number[],
    public frameSeconds: number,
    private onChange: (frame: number, index: number) => void = () => {},
  ) {
    if (!frames.length) throw new Error("playback needs at least one frame");
  }

  get cursorIndex(): number {
    return this.index;
  }

  get cursorFrame(): number {
    return this.frames[this.index];
  }

  private emit(): void {
    this.onChange(this.cursorFrame, this.index);
  }

  play(): void {
    if (this.index === this.frames.length - 1) this.index = 0;
    this.playing = true;
    this.emit();
  }

  pause(): void {
    this.playing = false;
    this.accumulator = 0;
  }

  toggle(): void {
    this.playing ? this.pause() : this.play();
  }

  /** Advance by wall-clock milliseconds while playing. Stops at the end. */
  tick(elapsedMs: number): void {
    if (!this.playing) return;
    this.accumulator += (elapsedMs / 1000) * this.speed;
    const frameStep = this.frameSeconds;
    while (this.accumulator >= frameStep && this.index < this.frames.length - 1) {
      this.accumulator -= frameStep;
      this.index += 1;
    }
    if (this.index >= this.frames.length - 1) {
      this.index = this.frames.length - 1;
      this.playing = false;
    }
    this.emit();
  }

  /** Jump to a 0..1 timeline fraction (scrubber drag). */
  scrubTo(fraction: number): void {
    const clamped = Math.min(Math.max(fraction, 0), 1);
    this.index = Math.round(clamped * (this.frames.length - 1));
    this.emit();
  }

  seekIndex(i: number): void {
    this.index = Math.min(Math.max(i, 0), this.frames.length - 1);
    this.emit();
  }

  step(delta: number): void {
    this.pause();
    this.seekIndex(this.index + delta);
  }
}
